//! Undirected adjacency structure in CSR form, shared by the ordering and
//! partitioning code. Neighbor lists are sorted and contain no self-loops.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    xadj: Vec<usize>,
    adj: Vec<u32>,
}

impl Graph {
    /// Build from undirected edges (each pair listed once, either direction).
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Graph {
        let mut deg = vec![0usize; n];
        for &(a, b) in edges {
            assert!((a as usize) < n && (b as usize) < n, "edge endpoint out of range");
            if a == b {
                continue;
            }
            deg[a as usize] += 1;
            deg[b as usize] += 1;
        }
        let mut xadj = vec![0usize; n + 1];
        for v in 0..n {
            xadj[v + 1] = xadj[v] + deg[v];
        }
        let mut adj = vec![0u32; xadj[n]];
        let mut cur = xadj.clone();
        for &(a, b) in edges {
            if a == b {
                continue;
            }
            adj[cur[a as usize]] = b;
            cur[a as usize] += 1;
            adj[cur[b as usize]] = a;
            cur[b as usize] += 1;
        }
        let mut g = Graph { n, xadj, adj };
        g.sort_neighbors();
        g
    }

    /// Wrap prebuilt CSR arrays (assumed symmetric, sorted, loop-free).
    pub fn from_csr(n: usize, xadj: Vec<usize>, adj: Vec<u32>) -> Graph {
        debug_assert_eq!(xadj.len(), n + 1);
        debug_assert_eq!(*xadj.last().unwrap_or(&0), adj.len());
        Graph { n, xadj, adj }
    }

    fn sort_neighbors(&mut self) {
        for v in 0..self.n {
            let (s, e) = (self.xadj[v], self.xadj[v + 1]);
            self.adj[s..e].sort_unstable();
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.adj.len() / 2
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.xadj[v + 1] - self.xadj[v]
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adj[self.xadj[v]..self.xadj[v + 1]]
    }

    /// BFS from `start` restricted to vertices where `mask` is true.
    /// Returns (levels, visited order); unreachable vertices get level
    /// `u32::MAX`.
    pub fn bfs_levels(&self, start: usize, mask: impl Fn(usize) -> bool) -> (Vec<u32>, Vec<u32>) {
        let mut level = vec![u32::MAX; self.n];
        let mut order = Vec::new();
        if !mask(start) {
            return (level, order);
        }
        let mut queue = std::collections::VecDeque::new();
        level[start] = 0;
        queue.push_back(start as u32);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let lv = level[v as usize];
            for &w in self.neighbors(v as usize) {
                if level[w as usize] == u32::MAX && mask(w as usize) {
                    level[w as usize] = lv + 1;
                    queue.push_back(w);
                }
            }
        }
        (level, order)
    }

    pub fn accounted_bytes(&self) -> u64 {
        self.adj.len() as u64 * 4 + self.xadj.len() as u64 * 8
    }
}
