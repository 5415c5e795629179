//! Domain decomposition of the matrix graph: balanced partitioning,
//! interior/interface classification, signature-based grouping of interface
//! vertices, and the arrowhead layout permutation.
//!
//! Partitioning is recursive graph bisection. Every bisection builds a
//! breadth-first level structure, assigns whole levels to the near side up to
//! its proportional share, runs one pass of boundary-vertex refinement, and
//! restores exact side sizes by greedy boundary moves. Two seed rules are
//! available:
//!
//! * [`SeedRule::PseudoPeripheral`] seeds each BFS at a pseudo-peripheral
//!   vertex (classic level-structure bisection).
//! * [`SeedRule::BoundaryFace`] (default) seeds each BFS at the smallest
//!   candidate *face* of the region: either the cut surface inherited from
//!   the parent bisection or a connected piece of the domain boundary
//!   (detected degree-profile-wise, no coordinates). On grid-like graphs the
//!   level sets are then parallel planes, so successive cuts alternate axes
//!   and the parts converge to near-optimal box shapes. Falls back to the
//!   pseudo-peripheral seed when no face is detectable.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, BTreeMap, VecDeque};
use std::fmt;

use crate::graph::Graph;
use crate::order::Permutation;

#[derive(Debug, PartialEq, Eq)]
pub enum DecomposeError {
    /// `n_parts` outside `1..=n`.
    BadPartCount { n_parts: usize, n: usize },
    /// An edge connects interior vertices of two different parts.
    SeparatorViolation { u: u32, v: u32 },
    /// Inputs passed to `build_layout` do not describe the same vertex set.
    Inconsistent(&'static str),
}

impl fmt::Display for DecomposeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecomposeError::BadPartCount { n_parts, n } => {
                write!(f, "n_parts {n_parts} out of range for {n} vertices")
            }
            DecomposeError::SeparatorViolation { u, v } => {
                write!(f, "edge {u}-{v} connects interiors of different parts")
            }
            DecomposeError::Inconsistent(what) => write!(f, "inconsistent inputs: {what}"),
        }
    }
}

impl std::error::Error for DecomposeError {}

/// Seed choice for each bisection's BFS level structure.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SeedRule {
    /// Pseudo-peripheral single-vertex seed.
    PseudoPeripheral,
    /// Smallest boundary face (inherited cut surface or detected domain
    /// face); pseudo-peripheral fallback.
    #[default]
    BoundaryFace,
}

/// Vertex → part assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    part: Vec<u32>,
    n_parts: usize,
}

impl Partition {
    /// Wrap an existing assignment; every id must be `< n_parts` and every
    /// part nonempty.
    pub fn from_parts(part: Vec<u32>, n_parts: usize) -> Result<Partition, DecomposeError> {
        if n_parts == 0 || n_parts > part.len() {
            return Err(DecomposeError::BadPartCount { n_parts, n: part.len() });
        }
        let mut seen = vec![false; n_parts];
        for &p in &part {
            if p as usize >= n_parts {
                return Err(DecomposeError::Inconsistent("part id out of range"));
            }
            seen[p as usize] = true;
        }
        if !seen.iter().all(|&s| s) {
            return Err(DecomposeError::Inconsistent("empty part"));
        }
        Ok(Partition { part, n_parts })
    }

    #[inline]
    pub fn n_parts(&self) -> usize {
        self.n_parts
    }

    #[inline]
    pub fn part_of(&self, v: usize) -> u32 {
        self.part[v]
    }

    #[inline]
    pub fn parts(&self) -> &[u32] {
        &self.part
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0usize; self.n_parts];
        for &p in &self.part {
            s[p as usize] += 1;
        }
        s
    }
}

/// Balanced partition with the default seed rule.
pub fn partition(g: &Graph, n_parts: usize) -> Result<Partition, DecomposeError> {
    partition_with(g, n_parts, SeedRule::default())
}

/// Balanced partition via recursive bisection with the given seed rule.
/// Deterministic: all ties break toward the lowest vertex index. Part sizes
/// land exactly on `n/p` rounded, well inside the `ceil(1.05 n/p)` bound.
pub fn partition_with(
    g: &Graph,
    n_parts: usize,
    rule: SeedRule,
) -> Result<Partition, DecomposeError> {
    let n = g.n();
    if n_parts == 0 || n_parts > n {
        return Err(DecomposeError::BadPartCount { n_parts, n });
    }
    let mut part = vec![0u32; n];
    if n_parts > 1 {
        let targets: Vec<usize> = (0..n_parts)
            .map(|i| n / n_parts + usize::from(i < n % n_parts))
            .collect();
        let faces = match rule {
            SeedRule::BoundaryFace => boundary_faces(g),
            SeedRule::PseudoPeripheral => Vec::new(),
        };
        let mut sp = Splitter {
            g,
            targets: &targets,
            rule,
            faces: &faces,
            part: &mut part,
            member_stamp: vec![0u32; n],
            stamp: 0,
            side: vec![0u8; n],
            level: vec![u32::MAX; n],
        };
        let members: Vec<u32> = (0..n as u32).collect();
        sp.split(members, 0, n_parts, Vec::new());
    }
    Ok(Partition { part, n_parts })
}

/// Connected pieces of the domain boundary, detected from the degree profile:
/// take the most common degree among vertices of non-maximal degree ("face
/// interior" degree), erode vertices touching anything of smaller degree
/// (edges/corners), and split what remains into connected components. On a
/// grid this yields exactly the flat faces of the domain.
fn boundary_faces(g: &Graph) -> Vec<Vec<u32>> {
    let n = g.n();
    let max_deg = (0..n).map(|v| g.degree(v)).max().unwrap_or(0);
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    for v in 0..n {
        let d = g.degree(v);
        if d < max_deg {
            *hist.entry(d).or_insert(0) += 1;
        }
    }
    let Some((&mode, _)) = hist.iter().max_by_key(|&(&d, &c)| (c, Reverse(d))) else {
        return Vec::new();
    };
    let in_face: Vec<bool> = (0..n)
        .map(|v| {
            g.degree(v) == mode && g.neighbors(v).iter().all(|&w| g.degree(w as usize) >= mode)
        })
        .collect();
    let mut seen = vec![false; n];
    let mut comps = Vec::new();
    for v in 0..n {
        if !in_face[v] || seen[v] {
            continue;
        }
        let mut comp = vec![v as u32];
        let mut q = VecDeque::from([v]);
        seen[v] = true;
        while let Some(u) = q.pop_front() {
            for &w in g.neighbors(u) {
                let w = w as usize;
                if in_face[w] && !seen[w] {
                    seen[w] = true;
                    comp.push(w as u32);
                    q.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

struct Splitter<'a> {
    g: &'a Graph,
    targets: &'a [usize],
    rule: SeedRule,
    faces: &'a [Vec<u32>],
    part: &'a mut [u32],
    /// `member_stamp[v] == stamp` marks v as a member of the current split.
    member_stamp: Vec<u32>,
    stamp: u32,
    /// 0 = near side, 1 = far side (valid for current members only).
    side: Vec<u8>,
    level: Vec<u32>,
}

impl Splitter<'_> {
    fn split(&mut self, members: Vec<u32>, lo: usize, hi: usize, inherited: Vec<u32>) {
        let count = hi - lo;
        if count == 1 {
            for &v in &members {
                self.part[v as usize] = lo as u32;
            }
            return;
        }
        let p_l = (count + 1) / 2;
        let cap_l: usize = self.targets[lo..lo + p_l].iter().sum();
        let cap_r = members.len() - cap_l;

        self.stamp += 1;
        let stamp = self.stamp;
        for &v in &members {
            self.member_stamp[v as usize] = stamp;
        }

        let seed = self.choose_seed(&members, &inherited);
        self.bfs_from_set(&seed);

        // Assign whole levels to the near side until the share is reached.
        let mut ord = members.clone();
        ord.sort_unstable_by_key(|&v| (self.level[v as usize], v));
        let mut cum = 0usize;
        let mut idx = 0usize;
        while idx < ord.len() {
            let lev = self.level[ord[idx] as usize];
            let mut end = idx;
            while end < ord.len() && self.level[ord[end] as usize] == lev {
                end += 1;
            }
            if cum + (end - idx) > cap_l {
                break;
            }
            cum += end - idx;
            idx = end;
        }
        for (i, &v) in ord.iter().enumerate() {
            self.side[v as usize] = u8::from(i >= idx);
        }
        self.rebalance(&members, cap_l, cum);
        self.refine(&members, cap_l, cap_r);

        let near: Vec<u32> = members.iter().copied().filter(|&v| self.side[v as usize] == 0).collect();
        let far: Vec<u32> = members.iter().copied().filter(|&v| self.side[v as usize] == 1).collect();
        let cut_near: Vec<u32> = near
            .iter()
            .copied()
            .filter(|&v| {
                self.g.neighbors(v as usize).iter().any(|&w| {
                    self.member_stamp[w as usize] == stamp && self.side[w as usize] == 1
                })
            })
            .collect();
        let cut_far: Vec<u32> = far
            .iter()
            .copied()
            .filter(|&v| {
                self.g.neighbors(v as usize).iter().any(|&w| {
                    self.member_stamp[w as usize] == stamp && self.side[w as usize] == 0
                })
            })
            .collect();
        self.split(near, lo, lo + p_l, cut_near);
        self.split(far, lo + p_l, hi, cut_far);
    }

    fn choose_seed(&mut self, members: &[u32], inherited: &[u32]) -> Vec<u32> {
        if self.rule == SeedRule::BoundaryFace {
            let stamp = self.stamp;
            let mut best: Option<Vec<u32>> = None;
            let mut consider = |cand: Vec<u32>| {
                if cand.is_empty() || cand.len() >= members.len() {
                    return;
                }
                match &best {
                    Some(b) if (b.len(), b[0]) <= (cand.len(), cand[0]) => {}
                    _ => best = Some(cand),
                }
            };
            if !inherited.is_empty() {
                consider(inherited.to_vec());
            }
            for f in self.faces {
                let piece: Vec<u32> = f
                    .iter()
                    .copied()
                    .filter(|&v| self.member_stamp[v as usize] == stamp)
                    .collect();
                consider(piece);
            }
            if let Some(b) = best {
                return b;
            }
        }
        vec![self.pseudo_peripheral(members)]
    }

    /// Double-sweep pseudo-peripheral vertex, lowest-index ties.
    fn pseudo_peripheral(&mut self, members: &[u32]) -> u32 {
        let stamp = self.stamp;
        let mut s = members[0];
        let mut ecc = 0u32;
        loop {
            self.bfs_from_set(&[s]);
            let mut far = s;
            let mut far_lev = 0u32;
            for &v in members {
                let lv = self.level[v as usize];
                if lv != u32::MAX && (lv > far_lev || (lv == far_lev && v < far)) {
                    far_lev = lv;
                    far = v;
                }
            }
            let _ = stamp;
            if far_lev > ecc {
                ecc = far_lev;
                s = far;
            } else {
                return s;
            }
        }
    }

    /// Multi-source BFS over current members; fills `self.level`
    /// (`u32::MAX` = unreached).
    fn bfs_from_set(&mut self, seed: &[u32]) {
        let stamp = self.stamp;
        // Only member levels are read back, so clearing lazily via the seed
        // wave is not enough; reset members' levels first.
        for v in 0..self.level.len() {
            if self.member_stamp[v] == stamp {
                self.level[v] = u32::MAX;
            }
        }
        let mut q = VecDeque::new();
        for &s in seed {
            if self.member_stamp[s as usize] == stamp {
                self.level[s as usize] = 0;
                q.push_back(s);
            }
        }
        while let Some(u) = q.pop_front() {
            let lv = self.level[u as usize];
            for &w in self.g.neighbors(u as usize) {
                let wi = w as usize;
                if self.member_stamp[wi] == stamp && self.level[wi] == u32::MAX {
                    self.level[wi] = lv + 1;
                    q.push_back(w);
                }
            }
        }
    }

    fn gain(&self, v: u32, dst: u8) -> i64 {
        let stamp = self.member_stamp[v as usize];
        let mut g = 0i64;
        for &w in self.g.neighbors(v as usize) {
            if self.member_stamp[w as usize] == stamp {
                if self.side[w as usize] == dst {
                    g += 1;
                } else {
                    g -= 1;
                }
            }
        }
        g
    }

    /// Greedy boundary moves until the near side holds exactly `cap_l`
    /// vertices. Moves pick the highest cut gain, lowest index on ties; if no
    /// boundary move exists (disconnected region) the lowest-index vertex is
    /// moved regardless.
    fn rebalance(&mut self, members: &[u32], cap_l: usize, mut near_size: usize) {
        if near_size == cap_l {
            return;
        }
        let stamp = self.stamp;
        let (src, dst) = if near_size > cap_l { (0u8, 1u8) } else { (1u8, 0u8) };
        let mut heap: BinaryHeap<(i64, Reverse<u32>)> = BinaryHeap::new();
        for &v in members {
            if self.side[v as usize] == src
                && self.g.neighbors(v as usize).iter().any(|&w| {
                    self.member_stamp[w as usize] == stamp && self.side[w as usize] == dst
                })
            {
                heap.push((self.gain(v, dst), Reverse(v)));
            }
        }
        while near_size != cap_l {
            let mut moved = None;
            while let Some((g0, Reverse(v))) = heap.pop() {
                if self.side[v as usize] != src {
                    continue;
                }
                let g1 = self.gain(v, dst);
                if g1 != g0 {
                    heap.push((g1, Reverse(v)));
                    continue;
                }
                moved = Some(v);
                break;
            }
            let v = moved.unwrap_or_else(|| {
                // Disconnected leftovers: force the lowest-index source vertex.
                *members
                    .iter()
                    .find(|&&v| self.side[v as usize] == src)
                    .expect("side sizes and cap are consistent")
            });
            self.side[v as usize] = dst;
            near_size = if dst == 0 { near_size + 1 } else { near_size - 1 };
            for &w in self.g.neighbors(v as usize) {
                if self.member_stamp[w as usize] == stamp && self.side[w as usize] == src {
                    heap.push((self.gain(w, dst), Reverse(w)));
                }
            }
        }
    }

    /// One pass over the cut boundary in ascending vertex order: move any
    /// vertex whose move strictly reduces the cut, within a small size slack;
    /// then restore exact sizes.
    fn refine(&mut self, members: &[u32], cap_l: usize, cap_r: usize) {
        let stamp = self.stamp;
        let slack = (cap_l.min(cap_r) / 25).min(members.len());
        let boundary: Vec<u32> = members
            .iter()
            .copied()
            .filter(|&v| {
                let s = self.side[v as usize];
                self.g.neighbors(v as usize).iter().any(|&w| {
                    self.member_stamp[w as usize] == stamp && self.side[w as usize] != s
                })
            })
            .collect();
        let mut near_size = members.iter().filter(|&&v| self.side[v as usize] == 0).count();
        for &v in &boundary {
            let s = self.side[v as usize];
            let dst = 1 - s;
            if self.gain(v, dst) > 0 {
                let after = if dst == 0 { near_size + 1 } else { near_size - 1 };
                if after.abs_diff(cap_l) <= slack {
                    self.side[v as usize] = dst;
                    near_size = after;
                }
            }
        }
        self.rebalance(members, cap_l, near_size);
    }
}

/// Interior/interface classification of a partitioned graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterfaceClassification {
    interior: Vec<Vec<u32>>,
    interface: Vec<u32>,
    signatures: Vec<Vec<u32>>,
}

impl InterfaceClassification {
    /// Sorted interior vertices of one part.
    pub fn interior(&self, part: usize) -> &[u32] {
        &self.interior[part]
    }

    pub fn n_parts(&self) -> usize {
        self.interior.len()
    }

    /// Sorted list of all interface vertices.
    pub fn interface(&self) -> &[u32] {
        &self.interface
    }

    /// Signature of `interface()[i]`: the sorted part ids of the vertex
    /// itself and all its neighbors.
    pub fn signature(&self, i: usize) -> &[u32] {
        &self.signatures[i]
    }
}

/// A vertex is interface iff some neighbor lies in a different part;
/// otherwise it is interior to its own part.
pub fn classify(g: &Graph, p: &Partition) -> InterfaceClassification {
    let n = g.n();
    let mut interior = vec![Vec::new(); p.n_parts()];
    let mut interface = Vec::new();
    let mut signatures = Vec::new();
    for v in 0..n {
        let pv = p.part_of(v);
        let cross = g.neighbors(v).iter().any(|&w| p.part_of(w as usize) != pv);
        if cross {
            let mut sig = vec![pv];
            for &w in g.neighbors(v) {
                sig.push(p.part_of(w as usize));
            }
            sig.sort_unstable();
            sig.dedup();
            interface.push(v as u32);
            signatures.push(sig);
        } else {
            interior[pv as usize].push(v as u32);
        }
    }
    InterfaceClassification { interior, interface, signatures }
}

/// Interface vertices grouped by identical signature, groups ordered by
/// signature lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterfaceGroups {
    groups: Vec<(Vec<u32>, Vec<u32>)>,
}

impl InterfaceGroups {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Signature (sorted part ids) of group `gi`.
    pub fn signature(&self, gi: usize) -> &[u32] {
        &self.groups[gi].0
    }

    /// Sorted vertices of group `gi`.
    pub fn vertices(&self, gi: usize) -> &[u32] {
        &self.groups[gi].1
    }
}

pub fn group_interface(c: &InterfaceClassification) -> InterfaceGroups {
    let mut map: BTreeMap<&[u32], Vec<u32>> = BTreeMap::new();
    for (i, &v) in c.interface().iter().enumerate() {
        map.entry(c.signature(i)).or_default().push(v);
    }
    InterfaceGroups {
        groups: map.into_iter().map(|(s, vs)| (s.to_vec(), vs)).collect(),
    }
}

/// Permutation placing part interiors first (part 0, part 1, …), then the
/// interface groups in group order, plus the segment offsets.
#[derive(Debug, Clone)]
pub struct ArrowheadLayout {
    perm: Permutation,
    /// `part_offsets[i]..part_offsets[i+1]` = new indices of part i interior.
    part_offsets: Vec<usize>,
    /// `group_offsets[g]..group_offsets[g+1]` = new indices of group g;
    /// `group_offsets[0]` equals the total interior size.
    group_offsets: Vec<usize>,
    group_signatures: Vec<Vec<u32>>,
    /// Old vertex id → position within the interface segment (`u32::MAX` for
    /// interior vertices).
    interface_pos: Vec<u32>,
    /// Interface position → group id.
    group_of: Vec<u32>,
}

impl ArrowheadLayout {
    pub fn n(&self) -> usize {
        self.perm.len()
    }

    pub fn n_parts(&self) -> usize {
        self.part_offsets.len() - 1
    }

    pub fn n_interior(&self) -> usize {
        *self.part_offsets.last().unwrap()
    }

    pub fn n_interface(&self) -> usize {
        self.n() - self.n_interior()
    }

    pub fn n_groups(&self) -> usize {
        self.group_offsets.len() - 1
    }

    pub fn perm(&self) -> &Permutation {
        &self.perm
    }

    /// New-index range of part `i`'s interior segment.
    pub fn interior_range(&self, i: usize) -> std::ops::Range<usize> {
        self.part_offsets[i]..self.part_offsets[i + 1]
    }

    /// New-index range of group `g`'s segment.
    pub fn group_range(&self, g: usize) -> std::ops::Range<usize> {
        self.group_offsets[g]..self.group_offsets[g + 1]
    }

    pub fn group_signature(&self, g: usize) -> &[u32] {
        &self.group_signatures[g]
    }

    /// Old vertex ids of part `i`'s interior, in layout order (ascending).
    pub fn interior_vertices(&self, i: usize) -> &[u32] {
        &self.perm.as_new_to_old()[self.interior_range(i)]
    }

    /// Old vertex ids of group `g`, in layout order (ascending).
    pub fn group_vertices(&self, g: usize) -> &[u32] {
        &self.perm.as_new_to_old()[self.group_range(g)]
    }

    /// Position of an old vertex id within the interface segment.
    pub fn interface_pos(&self, old: usize) -> Option<usize> {
        match self.interface_pos[old] {
            u32::MAX => None,
            p => Some(p as usize),
        }
    }

    /// Group id owning interface position `ipos`.
    pub fn group_of_pos(&self, ipos: usize) -> usize {
        self.group_of[ipos] as usize
    }

    /// Diagnostic vertex → segment table.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let n2o = self.perm.as_new_to_old();
        for i in 0..self.n_parts() {
            for new in self.interior_range(i) {
                out.push_str(&format!("{}\tinterior part {}\n", n2o[new], i));
            }
        }
        for g in 0..self.n_groups() {
            let sig: Vec<String> =
                self.group_signature(g).iter().map(|p| p.to_string()).collect();
            for new in self.group_range(g) {
                out.push_str(&format!("{}\tgroup {} sig {{{}}}\n", n2o[new], g, sig.join(",")));
            }
        }
        out
    }

    pub fn accounted_bytes(&self) -> u64 {
        (self.perm.len() as u64) * 8
            + (self.part_offsets.len() + self.group_offsets.len()) as u64 * 8
            + self.interface_pos.len() as u64 * 4
            + self.group_of.len() as u64 * 4
    }
}

/// Build the arrowhead layout and verify the separator property edge by
/// edge (an interior vertex must never touch a different part).
pub fn build_layout(
    g: &Graph,
    p: &Partition,
    c: &InterfaceClassification,
    grps: &InterfaceGroups,
) -> Result<ArrowheadLayout, DecomposeError> {
    let n = g.n();
    if p.parts().len() != n || c.n_parts() != p.n_parts() {
        return Err(DecomposeError::Inconsistent("partition/classification size"));
    }
    let n_interior: usize = (0..p.n_parts()).map(|i| c.interior(i).len()).sum();
    let n_grouped: usize = (0..grps.len()).map(|g| grps.vertices(g).len()).sum();
    if n_interior + c.interface().len() != n || n_grouped != c.interface().len() {
        return Err(DecomposeError::Inconsistent("segment sizes do not cover the graph"));
    }

    let mut is_interior = vec![false; n];
    for i in 0..p.n_parts() {
        for &v in c.interior(i) {
            is_interior[v as usize] = true;
        }
    }
    for v in 0..n {
        if !is_interior[v] {
            continue;
        }
        for &w in g.neighbors(v) {
            if is_interior[w as usize] && p.part_of(w as usize) != p.part_of(v) {
                return Err(DecomposeError::SeparatorViolation { u: v as u32, v: w });
            }
        }
    }

    let mut new_to_old = Vec::with_capacity(n);
    let mut part_offsets = Vec::with_capacity(p.n_parts() + 1);
    part_offsets.push(0);
    for i in 0..p.n_parts() {
        new_to_old.extend(c.interior(i).iter().map(|&v| v as usize));
        part_offsets.push(new_to_old.len());
    }
    let mut group_offsets = Vec::with_capacity(grps.len() + 1);
    let mut group_signatures = Vec::with_capacity(grps.len());
    let mut interface_pos = vec![u32::MAX; n];
    let mut group_of = Vec::with_capacity(c.interface().len());
    group_offsets.push(new_to_old.len());
    for gi in 0..grps.len() {
        for &v in grps.vertices(gi) {
            interface_pos[v as usize] = (new_to_old.len() - n_interior) as u32;
            new_to_old.push(v as usize);
            group_of.push(gi as u32);
        }
        group_offsets.push(new_to_old.len());
        group_signatures.push(grps.signature(gi).to_vec());
    }
    let perm = Permutation::from_new_to_old(new_to_old)
        .map_err(|_| DecomposeError::Inconsistent("layout is not a permutation"))?;
    Ok(ArrowheadLayout {
        perm,
        part_offsets,
        group_offsets,
        group_signatures,
        interface_pos,
        group_of,
    })
}
