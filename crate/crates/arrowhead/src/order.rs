//! Fill-reducing orderings: an approximate-minimum-degree implementation on
//! the quotient graph (supervariables, element absorption, mass elimination)
//! plus the trivial natural ordering. Pivot ties always break toward the
//! lowest vertex id, so orderings are reproducible bit-for-bit.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::graph::Graph;

#[derive(Debug, Error)]
pub enum OrderError {
    #[error("permutation is not a bijection on 0..{0}")]
    NotBijective(usize),
}

/// Symmetric permutation. `perm[new] = old`; applying to a matrix A yields
/// B with B[i,j] = A[perm[i], perm[j]].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    perm: Vec<u32>,
    inv: Vec<u32>,
}

impl Permutation {
    pub fn identity(n: usize) -> Permutation {
        let perm: Vec<u32> = (0..n as u32).collect();
        Permutation { inv: perm.clone(), perm }
    }

    /// Build from a new→old map.
    pub fn from_new_to_old(perm: Vec<usize>) -> Result<Permutation, OrderError> {
        let n = perm.len();
        let mut inv = vec![u32::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            if old >= n || inv[old] != u32::MAX {
                return Err(OrderError::NotBijective(n));
            }
            inv[old] = new as u32;
        }
        Ok(Permutation { perm: perm.into_iter().map(|x| x as u32).collect(), inv })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Old index occupying position `new`.
    #[inline]
    pub fn old_index(&self, new: usize) -> usize {
        self.perm[new] as usize
    }

    /// Position that old index `old` moves to.
    #[inline]
    pub fn new_index(&self, old: usize) -> usize {
        self.inv[old] as usize
    }

    pub fn inverse(&self) -> Permutation {
        Permutation { perm: self.inv.clone(), inv: self.perm.clone() }
    }

    pub fn as_new_to_old(&self) -> &[u32] {
        &self.perm
    }
}

/// Ordering rule applied before sparse factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillOrdering {
    Natural,
    Amd,
}

impl FillOrdering {
    pub fn compute(self, g: &Graph) -> Permutation {
        match self {
            FillOrdering::Natural => Permutation::identity(g.n()),
            FillOrdering::Amd => amd_order(g),
        }
    }
}

const EMPTY: i64 = -1;

#[inline]
fn flip(x: i64) -> i64 {
    -x - 2
}

/// Quotient-graph state for the approximate-minimum-degree elimination.
struct Amd {
    n: usize,
    /// Arena of adjacency / element lists.
    iw: Vec<i64>,
    /// Start of node i's list in `iw`; for an absorbed node, flip(parent).
    pe: Vec<i64>,
    /// Total list length (elements first, then supervariables).
    len: Vec<usize>,
    /// For variables: number of leading entries of the list that are
    /// elements. For eliminated elements: flip(size of the pivot block).
    elen: Vec<i64>,
    /// Supervariable multiplicity; 0 once merged/mass-eliminated; negated
    /// while a variable sits in the current front.
    nv: Vec<i64>,
    /// Approximate external degree for variables; |Le| for elements.
    degree: Vec<i64>,
    /// Marker work array; w[e] = 0 flags an absorbed element.
    w: Vec<i64>,
    wflg: i64,
    /// First free slot in `iw`.
    pfree: usize,
    heap: BinaryHeap<Reverse<(i64, u32)>>,
    /// Elimination sequence of pivot elements.
    elim_order: Vec<u32>,
    /// Parent link for merged / mass-eliminated variables.
    parent: Vec<i64>,
}

/// Approximate minimum degree ordering of the graph. Deterministic: pivot
/// ties break toward the lowest vertex id and supervariable merges keep the
/// lowest id as principal. The empty graph yields the identity.
pub fn amd_order(g: &Graph) -> Permutation {
    let n = g.n();
    if n == 0 {
        return Permutation::identity(0);
    }
    let mut st = Amd::new(g);
    st.run();
    st.output()
}

impl Amd {
    fn new(g: &Graph) -> Amd {
        let n = g.n();
        let nz = 2 * g.num_edges();
        let iwlen = nz + nz / 2 + 2 * n + 64;
        let mut iw = Vec::with_capacity(iwlen);
        let mut pe = vec![0i64; n];
        let mut len = vec![0usize; n];
        for v in 0..n {
            pe[v] = iw.len() as i64;
            len[v] = g.degree(v);
            for &u in g.neighbors(v) {
                iw.push(u as i64);
            }
        }
        let pfree = iw.len();
        iw.resize(iwlen, 0);

        let mut heap = BinaryHeap::with_capacity(n);
        let mut degree = vec![0i64; n];
        for v in 0..n {
            degree[v] = len[v] as i64;
            heap.push(Reverse((degree[v], v as u32)));
        }

        Amd {
            n,
            iw,
            pe,
            len,
            elen: vec![0; n],
            nv: vec![1; n],
            degree,
            w: vec![1; n],
            wflg: 2,
            pfree,
            heap,
            elim_order: Vec::with_capacity(n),
            parent: vec![EMPTY; n],
        }
    }

    fn run(&mut self) {
        let n = self.n;
        let mut nel = 0usize;
        let mut lemax = 0i64;
        while nel < n {
            let me = self.pick_pivot();
            let (pme1, pme2, degme, built_at_free) = self.construct_element(me, &mut nel);
            self.clear_flag();
            self.scan1(pme1, pme2);
            let degme = self.scan2(me, pme1, pme2, degme, &mut nel);
            lemax = lemax.max(degme);
            self.wflg += lemax;
            self.clear_flag();
            self.merge_supervariables(pme1, pme2);
            self.restore_front(me, pme1, pme2, degme, nel, built_at_free);
            self.elim_order.push(me as u32);
        }
    }

    /// Lowest (degree, id) live principal variable, via lazy heap deletion.
    fn pick_pivot(&mut self) -> usize {
        loop {
            let Reverse((d, v)) = self.heap.pop().expect("pivot pool exhausted");
            let v = v as usize;
            if self.nv[v] > 0 && self.elen[v] >= 0 && self.degree[v] == d {
                return v;
            }
        }
    }

    fn clear_flag(&mut self) {
        let wbig = i64::MAX - 2 * self.n as i64;
        if self.wflg < 2 || self.wflg >= wbig {
            for x in self.w.iter_mut() {
                if *x != 0 {
                    *x = 1;
                }
            }
            self.wflg = 2;
        }
    }

    /// Compact `iw`, preserving every live list (variables and unabsorbed
    /// elements).
    fn collect_garbage(&mut self) {
        // Flag each live list head: stash its first entry in pe and leave
        // flip(owner) in the arena.
        for j in 0..self.n {
            let pj = self.pe[j];
            if pj >= 0 && self.list_alive(j) {
                if self.len[j] == 0 {
                    // keep a harmless valid cursor; never dereferenced
                    self.pe[j] = 0;
                } else {
                    self.pe[j] = self.iw[pj as usize];
                    self.iw[pj as usize] = flip(j as i64);
                }
            }
        }
        let mut dst = 0usize;
        let mut src = 0usize;
        let end = self.pfree;
        while src < end {
            let x = self.iw[src];
            src += 1;
            if x <= EMPTY {
                let j = flip(x) as usize;
                self.iw[dst] = self.pe[j];
                self.pe[j] = dst as i64;
                dst += 1;
                for _ in 0..self.len[j] - 1 {
                    self.iw[dst] = self.iw[src];
                    dst += 1;
                    src += 1;
                }
            }
        }
        self.pfree = dst;
    }

    /// Whether node j still owns a list in the arena.
    fn list_alive(&self, j: usize) -> bool {
        if self.elen[j] < 0 {
            // eliminated element: alive unless absorbed
            self.w[j] != 0
        } else {
            // variable: alive unless merged away
            self.nv[j] != 0
        }
    }

    /// Eliminate pivot `me`: gather all live principal variables from its
    /// variable list and its elements' lists into the new element pattern
    /// Lme at iw[pme1..=pme2]. Returns (pme1, pme2, |Lme| with multiplicity,
    /// whether the pattern was built in fresh arena space).
    fn construct_element(&mut self, me: usize, nel: &mut usize) -> (usize, i64, i64, bool) {
        debug_assert!(self.nv[me] > 0);
        let nvpiv = self.nv[me];
        *nel += nvpiv as usize;
        self.nv[me] = -nvpiv;
        let mut degme = 0i64;

        let elenme = self.elen[me] as usize;
        let pme1: usize;
        let mut pme2: i64;

        if elenme == 0 {
            // no incident elements: compact the variable list in place
            pme1 = self.pe[me] as usize;
            pme2 = pme1 as i64 - 1;
            for p in pme1..pme1 + self.len[me] {
                let i = self.iw[p] as usize;
                let nvi = self.nv[i];
                if nvi > 0 {
                    degme += nvi;
                    self.nv[i] = -nvi;
                    pme2 += 1;
                    self.iw[pme2 as usize] = i as i64;
                }
            }
        } else {
            // ensure room for the worst-case pattern before building it
            let mut bound = self.len[me] - elenme;
            let pstart = self.pe[me] as usize;
            for p in pstart..pstart + elenme {
                let e = self.iw[p] as usize;
                bound += self.len[e];
            }
            if self.pfree + bound > self.iw.len() {
                self.collect_garbage();
                if self.pfree + bound > self.iw.len() {
                    self.iw.resize(self.pfree + bound + self.n, 0);
                }
            }

            pme1 = self.pfree;
            let p = self.pe[me] as usize;
            let slenme = self.len[me] - elenme;
            for k in 0..=elenme {
                let (list_start, ln, e) = if k < elenme {
                    let e = self.iw[p + k] as usize;
                    debug_assert!(self.elen[e] < 0 && self.w[e] != 0);
                    (self.pe[e] as usize, self.len[e], e)
                } else {
                    (p + elenme, slenme, me)
                };
                for q in list_start..list_start + ln {
                    let i = self.iw[q] as usize;
                    let nvi = self.nv[i];
                    if nvi > 0 {
                        degme += nvi;
                        self.nv[i] = -nvi;
                        self.iw[self.pfree] = i as i64;
                        self.pfree += 1;
                    }
                }
                if e != me {
                    // all of e's variables are in Lme now: absorb e
                    self.pe[e] = flip(me as i64);
                    self.w[e] = 0;
                }
            }
            pme2 = self.pfree as i64 - 1;
        }

        self.degree[me] = degme;
        self.pe[me] = pme1 as i64;
        self.len[me] = (pme2 - pme1 as i64 + 1) as usize;
        self.elen[me] = flip(nvpiv + degme);
        (pme1, pme2, degme, elenme != 0)
    }

    /// First scan: for each element e touching the front, leave
    /// w[e] - wflg = |Le \ Lme| (with multiplicity).
    fn scan1(&mut self, pme1: usize, pme2: i64) {
        let wflg = self.wflg;
        let mut pme = pme1 as i64;
        while pme <= pme2 {
            let i = self.iw[pme as usize] as usize;
            pme += 1;
            let eln = self.elen[i];
            if eln <= 0 {
                continue;
            }
            let nvi = -self.nv[i];
            debug_assert!(nvi > 0);
            let wnvi = wflg - nvi;
            let p1 = self.pe[i] as usize;
            for p in p1..p1 + eln as usize {
                let e = self.iw[p] as usize;
                let we = self.w[e];
                if we >= wflg {
                    self.w[e] = we - nvi;
                } else if we != 0 {
                    self.w[e] = self.degree[e] + wnvi;
                }
            }
        }
    }

    /// Second scan: rebuild each front variable's list (pruning dead
    /// entries, prepending me), refresh its approximate degree, detect mass
    /// eliminations, and record a pattern hash for supervariable merging.
    /// Returns the (possibly reduced) |Lme|.
    fn scan2(
        &mut self,
        me: usize,
        pme1: usize,
        pme2: i64,
        mut degme: i64,
        nel: &mut usize,
    ) -> i64 {
        let wflg = self.wflg;
        let mut pme = pme1 as i64;
        while pme <= pme2 {
            let i = self.iw[pme as usize] as usize;
            pme += 1;
            if self.nv[i] >= 0 {
                // already mass-eliminated earlier in this scan
                continue;
            }
            let p1 = self.pe[i] as usize;
            let p2 = p1 + self.elen[i] as usize;
            let mut pn = p1;
            let mut hash = 0u64;
            let mut deg = 0i64;

            // prune this variable's element list; aggressive absorption of
            // elements whose pattern is now covered by Lme
            for p in p1..p2 {
                let e = self.iw[p] as usize;
                let we = self.w[e];
                if we != 0 {
                    let dext = we - wflg;
                    if dext > 0 {
                        deg += dext;
                        self.iw[pn] = e as i64;
                        pn += 1;
                        hash = hash.wrapping_add(e as u64);
                    } else {
                        self.pe[e] = flip(me as i64);
                        self.w[e] = 0;
                    }
                }
            }
            let p3 = pn;

            // prune the variable list
            let p4 = p1 + self.len[i];
            for p in p2..p4 {
                let j = self.iw[p] as usize;
                let nvj = self.nv[j];
                if nvj > 0 {
                    deg += nvj;
                    self.iw[pn] = j as i64;
                    pn += 1;
                    hash = hash.wrapping_add(j as u64);
                }
            }

            if pn == p3 && p3 == p1 {
                // neighbors all lie inside Lme: eliminate i together with me
                self.pe[i] = flip(me as i64);
                self.parent[i] = me as i64;
                let nvi = -self.nv[i];
                degme -= nvi;
                // grow the pivot block (nv[me] is negated right now)
                self.nv[me] -= nvi;
                self.nv[i] = 0;
                self.elen[i] = EMPTY;
                *nel += nvi as usize;
            } else {
                self.degree[i] = self.degree[i].min(deg);
                // put me at the front of the element part
                self.iw[pn] = self.iw[p3];
                self.iw[p3] = self.iw[p1];
                self.iw[p1] = me as i64;
                self.elen[i] = (p3 - p1 + 1) as i64;
                self.len[i] = pn - p1 + 1;
                // stash the hash for the merge pass
                self.w_hash_store(i, hash);
            }
        }
        self.degree[me] = degme;
        degme
    }

    fn w_hash_store(&mut self, i: usize, hash: u64) {
        // parent[] is unused for live variables; borrow it to carry the
        // pattern hash until the merge pass runs.
        self.parent[i] = (hash % (u32::MAX as u64)) as i64;
    }

    /// Merge front variables with identical quotient-graph patterns. The
    /// lowest id in each identical group stays principal.
    fn merge_supervariables(&mut self, pme1: usize, pme2: i64) {
        if pme2 < pme1 as i64 {
            return;
        }
        let mut cands: Vec<(i64, u32)> = Vec::new();
        for p in pme1..=pme2 as usize {
            let i = self.iw[p] as usize;
            if self.nv[i] < 0 {
                cands.push((self.parent[i], i as u32));
            }
        }
        // group by hash, keep ids ascending inside each group
        cands.sort_unstable();
        let mut s = 0;
        while s < cands.len() {
            let mut e = s + 1;
            while e < cands.len() && cands[e].0 == cands[s].0 {
                e += 1;
            }
            if e - s >= 2 {
                self.merge_group(&cands[s..e]);
            }
            s = e;
        }
        // clear borrowed hash slots
        for p in pme1..=pme2 as usize {
            let i = self.iw[p] as usize;
            if self.nv[i] != 0 {
                self.parent[i] = EMPTY;
            }
        }
    }

    fn merge_group(&mut self, group: &[(i64, u32)]) {
        let k = group.len();
        let mut absorbed = vec![false; k];
        for a in 0..k {
            if absorbed[a] {
                continue;
            }
            let i = group[a].1 as usize;
            if self.nv[i] >= 0 {
                continue;
            }
            let ln = self.len[i];
            let eln = self.elen[i];
            // mark i's pattern (skipping the leading me)
            let p1 = self.pe[i] as usize;
            for p in p1 + 1..p1 + ln {
                self.w[self.iw[p] as usize] = self.wflg;
            }
            for b in a + 1..k {
                if absorbed[b] {
                    continue;
                }
                let j = group[b].1 as usize;
                if self.nv[j] >= 0 || self.len[j] != ln || self.elen[j] != eln {
                    continue;
                }
                let q1 = self.pe[j] as usize;
                let mut same = true;
                for q in q1 + 1..q1 + ln {
                    if self.w[self.iw[q] as usize] != self.wflg {
                        same = false;
                        break;
                    }
                }
                if same {
                    // absorb j into i (i < j by the sorted group order)
                    self.pe[j] = flip(i as i64);
                    self.parent[j] = i as i64;
                    self.nv[i] += self.nv[j];
                    self.nv[j] = 0;
                    self.elen[j] = EMPTY;
                    absorbed[b] = true;
                }
            }
            self.wflg += 1;
            self.clear_flag();
        }
    }

    /// Restore surviving front variables to the pivot pool with their final
    /// approximate degrees, and shrink the element pattern to live entries.
    fn restore_front(
        &mut self,
        me: usize,
        pme1: usize,
        pme2: i64,
        degme: i64,
        nel: usize,
        built_at_free: bool,
    ) {
        let nleft = (self.n - nel) as i64;
        let mut p = pme1;
        let mut pme = pme1 as i64;
        while pme <= pme2 {
            let i = self.iw[pme as usize] as usize;
            pme += 1;
            let nvi = -self.nv[i];
            if nvi <= 0 {
                continue;
            }
            self.nv[i] = nvi;
            let mut deg = self.degree[i] + degme - nvi;
            deg = deg.min(nleft - nvi).max(0);
            self.degree[i] = deg;
            self.heap.push(Reverse((deg, i as u32)));
            self.iw[p] = i as i64;
            p += 1;
        }
        self.nv[me] = -self.nv[me];
        self.len[me] = p - pme1;
        if self.len[me] == 0 {
            self.pe[me] = EMPTY;
            self.w[me] = 0;
        }
        if built_at_free {
            // release the tail of the freshly built pattern
            self.pfree = p;
        }
    }

    /// Expand the elimination sequence into a vertex permutation: each
    /// pivot's merged variables (ascending id) come first, the pivot last.
    fn output(mut self) -> Permutation {
        let n = self.n;
        // path-compress parents of merged variables to their pivot element
        for i in 0..n {
            if self.nv[i] != 0 {
                continue;
            }
            let mut j = self.parent[i];
            while self.nv[j as usize] == 0 {
                j = self.parent[j as usize];
            }
            let e = j;
            let mut j = i as i64;
            while self.nv[j as usize] == 0 {
                let next = self.parent[j as usize];
                self.parent[j as usize] = e;
                j = next;
            }
        }

        // base offsets per pivot element in elimination order
        let mut next = vec![0i64; n];
        let mut base = 0i64;
        for &e in &self.elim_order {
            next[e as usize] = base;
            base += self.nv[e as usize];
        }
        debug_assert_eq!(base, n as i64);

        let mut inv = vec![u32::MAX; n];
        for i in 0..n {
            if self.nv[i] == 0 {
                let e = self.parent[i] as usize;
                inv[i] = next[e] as u32;
                next[e] += 1;
            }
        }
        for &e in &self.elim_order {
            let e = e as usize;
            inv[e] = next[e] as u32;
            next[e] += 1;
        }

        let mut perm = vec![0u32; n];
        for (old, &new) in inv.iter().enumerate() {
            debug_assert_ne!(new, u32::MAX);
            perm[new as usize] = old as u32;
        }
        Permutation { perm, inv }
    }
}
