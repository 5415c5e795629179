//! Sparse symmetric matrices in compressed-sparse-column form, storing the
//! lower triangle only (column j holds rows ≥ j). Symmetry is implicit in
//! every operation; complex matrices are symmetric, never Hermitian.

use num_traits::Zero;
use thiserror::Error;

use crate::dense::DenseMatrix;
use crate::graph::Graph;
use crate::order::Permutation;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("entry ({row}, {col}) out of range for dimension {n}")]
    IndexOutOfRange { row: usize, col: usize, n: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Symmetric sparse matrix, lower-triangle CSC. Row indices within a column
/// are strictly increasing; duplicate coordinates are summed at build time.
/// A structurally absent diagonal entry is an exact zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SymSparseMatrix<T> {
    n: usize,
    colptr: Vec<usize>,
    rowidx: Vec<u32>,
    values: Vec<T>,
}

impl<T: Scalar> SymSparseMatrix<T> {
    /// Build from (row, col, value) triplets. Entries above the diagonal are
    /// mirrored into the lower triangle; duplicates (after mirroring) are
    /// summed.
    pub fn from_triplets(
        n: usize,
        triplets: impl IntoIterator<Item = (usize, usize, T)>,
    ) -> Result<Self, SparseError> {
        let mut entries: Vec<(u32, u32, T)> = Vec::new();
        for (r, c, v) in triplets {
            if r >= n || c >= n {
                return Err(SparseError::IndexOutOfRange { row: r, col: c, n });
            }
            let (row, col) = if r >= c { (r, c) } else { (c, r) };
            entries.push((col as u32, row as u32, v));
        }
        entries.sort_unstable_by_key(|&(c, r, _)| (c, r));

        let mut colptr = vec![0usize; n + 1];
        let mut rowidx: Vec<u32> = Vec::with_capacity(entries.len());
        let mut values: Vec<T> = Vec::with_capacity(entries.len());
        for &(c, r, v) in &entries {
            rowidx.push(r);
            values.push(v);
            colptr[c as usize + 1] = rowidx.len();
        }
        // columns with no entries inherit the previous cursor
        for c in 0..n {
            if colptr[c + 1] < colptr[c] {
                colptr[c + 1] = colptr[c];
            }
        }
        let mut m = SymSparseMatrix { n, colptr, rowidx, values };
        m.merge_duplicates();
        Ok(m)
    }

    fn merge_duplicates(&mut self) {
        let mut w = 0usize;
        let mut newptr = vec![0usize; self.n + 1];
        for c in 0..self.n {
            let (s, e) = (self.colptr[c], self.colptr[c + 1]);
            let mut r = s;
            while r < e {
                let row = self.rowidx[r];
                let mut v = self.values[r];
                let mut r2 = r + 1;
                while r2 < e && self.rowidx[r2] == row {
                    v += self.values[r2];
                    r2 += 1;
                }
                self.rowidx[w] = row;
                self.values[w] = v;
                w += 1;
                r = r2;
            }
            newptr[c + 1] = w;
        }
        self.rowidx.truncate(w);
        self.values.truncate(w);
        self.colptr = newptr;
    }

    /// CSC parts: (n, colptr, rowidx, values).
    pub fn parts(&self) -> (usize, &[usize], &[u32], &[T]) {
        (self.n, &self.colptr, &self.rowidx, &self.values)
    }

    pub fn from_parts(n: usize, colptr: Vec<usize>, rowidx: Vec<u32>, values: Vec<T>) -> Self {
        debug_assert_eq!(colptr.len(), n + 1);
        debug_assert_eq!(*colptr.last().unwrap_or(&0), rowidx.len());
        debug_assert_eq!(rowidx.len(), values.len());
        SymSparseMatrix { n, colptr, rowidx, values }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored entry count (lower triangle).
    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn col(&self, j: usize) -> (&[u32], &[T]) {
        let (s, e) = (self.colptr[j], self.colptr[j + 1]);
        (&self.rowidx[s..e], &self.values[s..e])
    }

    /// Entry lookup for tests; O(log nnz(col)).
    pub fn get(&self, r: usize, c: usize) -> T {
        let (row, col) = if r >= c { (r, c) } else { (c, r) };
        let (rows, vals) = self.col(col);
        match rows.binary_search(&(row as u32)) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    /// y = A · x for a panel of right-hand sides (x is n×k).
    pub fn matvec(&self, x: &DenseMatrix<T>) -> DenseMatrix<T> {
        assert_eq!(x.rows(), self.n, "matvec dimension mismatch");
        let mut y = DenseMatrix::zeros(self.n, x.cols());
        for j in 0..self.n {
            let (rows, vals) = self.col(j);
            for (&r, &v) in rows.iter().zip(vals.iter()) {
                let r = r as usize;
                if r == j {
                    let xr = x.row(j);
                    let yr = y.row_mut(j);
                    for t in 0..xr.len() {
                        yr[t] += v * xr[t];
                    }
                } else {
                    let xj = x.row(j);
                    let yr = y.row_mut(r);
                    for t in 0..xj.len() {
                        yr[t] += v * xj[t];
                    }
                    let xr = x.row(r);
                    let yj = y.row_mut(j);
                    for t in 0..xr.len() {
                        yj[t] += v * xr[t];
                    }
                }
            }
        }
        y
    }

    /// Max absolute row sum over the full (implicitly symmetric) matrix.
    pub fn norm_inf(&self) -> T::Real {
        let mut rowsum = vec![T::Real::zero(); self.n];
        for j in 0..self.n {
            let (rows, vals) = self.col(j);
            for (&r, &v) in rows.iter().zip(vals.iter()) {
                let m = v.modulus();
                rowsum[r as usize] += m;
                if r as usize != j {
                    rowsum[j] += m;
                }
            }
        }
        rowsum.into_iter().fold(T::Real::zero(), |a, b| if b > a { b } else { a })
    }

    /// Off-diagonal adjacency structure (both directions, sorted neighbor
    /// lists).
    pub fn adjacency(&self) -> Graph {
        let mut deg = vec![0usize; self.n];
        for j in 0..self.n {
            let (rows, _) = self.col(j);
            for &r in rows {
                if r as usize != j {
                    deg[j] += 1;
                    deg[r as usize] += 1;
                }
            }
        }
        let mut xadj = vec![0usize; self.n + 1];
        for v in 0..self.n {
            xadj[v + 1] = xadj[v] + deg[v];
        }
        let mut adj = vec![0u32; xadj[self.n]];
        let mut cursor = xadj.clone();
        for j in 0..self.n {
            let (rows, _) = self.col(j);
            for &r in rows {
                if r as usize != j {
                    adj[cursor[j]] = r;
                    cursor[j] += 1;
                    adj[cursor[r as usize]] = j as u32;
                    cursor[r as usize] += 1;
                }
            }
        }
        Graph::from_csr(self.n, xadj, adj)
    }

    /// Symmetric permutation B = P A Pᵀ, with B[i,j] = A[perm[i], perm[j]].
    pub fn permute(&self, p: &Permutation) -> Result<Self, SparseError> {
        if p.len() != self.n {
            return Err(SparseError::DimensionMismatch(format!(
                "permutation length {} vs matrix dimension {}",
                p.len(),
                self.n
            )));
        }
        let mut trip: Vec<(u32, u32, T)> = Vec::with_capacity(self.nnz());
        for c in 0..self.n {
            let (rows, vals) = self.col(c);
            let nc = p.new_index(c) as u32;
            for (&r, &v) in rows.iter().zip(vals.iter()) {
                let nr = p.new_index(r as usize) as u32;
                let (row, col) = if nr >= nc { (nr, nc) } else { (nc, nr) };
                trip.push((col, row, v));
            }
        }
        trip.sort_unstable_by_key(|&(c, r, _)| (c, r));
        let mut colptr = vec![0usize; self.n + 1];
        let mut rowidx = Vec::with_capacity(trip.len());
        let mut values = Vec::with_capacity(trip.len());
        for &(c, r, v) in &trip {
            rowidx.push(r);
            values.push(v);
            colptr[c as usize + 1] = rowidx.len();
        }
        for c in 0..self.n {
            if colptr[c + 1] < colptr[c] {
                colptr[c + 1] = colptr[c];
            }
        }
        Ok(SymSparseMatrix { n: self.n, colptr, rowidx, values })
    }

    /// Dense copy (tests and small oracles only).
    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut d = DenseMatrix::zeros(self.n, self.n);
        for j in 0..self.n {
            let (rows, vals) = self.col(j);
            for (&r, &v) in rows.iter().zip(vals.iter()) {
                *d.at_mut(r as usize, j) = v;
                if r as usize != j {
                    *d.at_mut(j, r as usize) = v;
                }
            }
        }
        d
    }

    /// Deterministic bytes of the CSC arrays.
    pub fn accounted_bytes(&self) -> u64 {
        self.values.len() as u64 * T::WIDTH
            + self.rowidx.len() as u64 * 4
            + self.colptr.len() as u64 * 8
    }
}

/// Rectangular sparse coupling block in CSC form (interior rows × interface
/// columns). Columns are local positions; the owner keeps the map to global
/// interface indices.
#[derive(Debug, Clone, PartialEq)]
pub struct RectSparse<T> {
    rows: usize,
    cols: usize,
    colptr: Vec<usize>,
    rowidx: Vec<u32>,
    values: Vec<T>,
}

impl<T: Scalar> RectSparse<T> {
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, T)>,
    ) -> Result<Self, SparseError> {
        let mut entries: Vec<(u32, u32, T)> = Vec::new();
        for (r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(SparseError::IndexOutOfRange { row: r, col: c, n: rows.max(cols) });
            }
            entries.push((c as u32, r as u32, v));
        }
        entries.sort_unstable_by_key(|&(c, r, _)| (c, r));
        let mut colptr = vec![0usize; cols + 1];
        let mut rowidx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        for &(c, r, v) in &entries {
            if colptr[c as usize + 1] == rowidx.len()
                && rowidx.last() == Some(&r)
                && colptr[c as usize] < rowidx.len()
            {
                *values.last_mut().unwrap() += v;
            } else {
                rowidx.push(r);
                values.push(v);
                colptr[c as usize + 1] = rowidx.len();
            }
        }
        for c in 0..cols {
            if colptr[c + 1] < colptr[c] {
                colptr[c + 1] = colptr[c];
            }
        }
        Ok(RectSparse { rows, cols, colptr, rowidx, values })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn col(&self, j: usize) -> (&[u32], &[T]) {
        let (s, e) = (self.colptr[j], self.colptr[j + 1]);
        (&self.rowidx[s..e], &self.values[s..e])
    }

    /// y += A · x (y: rows×k, x: cols×k).
    pub fn mul_add(&self, x: &DenseMatrix<T>, y: &mut DenseMatrix<T>) {
        assert_eq!(x.rows(), self.cols);
        assert_eq!(y.rows(), self.rows);
        for j in 0..self.cols {
            let (rows, vals) = self.col(j);
            for (&r, &v) in rows.iter().zip(vals.iter()) {
                let xr = x.row(j);
                let yr = y.row_mut(r as usize);
                for t in 0..xr.len() {
                    yr[t] += v * xr[t];
                }
            }
        }
    }

    /// y −= A · x (y: rows×k, x: cols×k).
    pub fn mul_sub(&self, x: &DenseMatrix<T>, y: &mut DenseMatrix<T>) {
        assert_eq!(x.rows(), self.cols);
        assert_eq!(y.rows(), self.rows);
        for j in 0..self.cols {
            let (rows, vals) = self.col(j);
            for (&r, &v) in rows.iter().zip(vals.iter()) {
                let xr = x.row(j);
                let yr = y.row_mut(r as usize);
                for t in 0..xr.len() {
                    yr[t] -= v * xr[t];
                }
            }
        }
    }

    /// y += Aᵀ · x (y: cols×k, x: rows×k).
    pub fn t_mul_add(&self, x: &DenseMatrix<T>, y: &mut DenseMatrix<T>) {
        assert_eq!(x.rows(), self.rows);
        assert_eq!(y.rows(), self.cols);
        for j in 0..self.cols {
            let (rows, vals) = self.col(j);
            let yr = y.row_mut(j);
            for (&r, &v) in rows.iter().zip(vals.iter()) {
                let xr = x.row(r as usize);
                for t in 0..xr.len() {
                    yr[t] += v * xr[t];
                }
            }
        }
    }

    pub fn accounted_bytes(&self) -> u64 {
        self.values.len() as u64 * T::WIDTH
            + self.rowidx.len() as u64 * 4
            + self.colptr.len() as u64 * 8
    }
}

/// Componentwise relative backward error per right-hand side:
/// ‖b_j − A·x_j‖∞ / (‖A‖∞·‖x_j‖∞ + ‖b_j‖∞), with 0/0 = 0.
pub fn relative_residual<T: Scalar>(
    a: &SymSparseMatrix<T>,
    x: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
) -> Vec<T::Real> {
    assert_eq!(x.rows(), a.n());
    assert_eq!(b.rows(), a.n());
    assert_eq!(x.cols(), b.cols());
    let anorm = a.norm_inf();
    let ax = a.matvec(x);
    let k = x.cols();
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let mut rmax = T::Real::zero();
        let mut xmax = T::Real::zero();
        let mut bmax = T::Real::zero();
        for i in 0..a.n() {
            let r = (b.at(i, j) - ax.at(i, j)).modulus();
            if r > rmax {
                rmax = r;
            }
            let xm = x.at(i, j).modulus();
            if xm > xmax {
                xmax = xm;
            }
            let bm = b.at(i, j).modulus();
            if bm > bmax {
                bmax = bm;
            }
        }
        let denom = anorm * xmax + bmax;
        if denom == T::Real::zero() {
            out.push(T::Real::zero());
        } else {
            out.push(rmax / denom);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SymSparseMatrix<f64> {
        // [[4,1,0],[1,3,2],[0,2,5]]
        SymSparseMatrix::from_triplets(
            3,
            vec![(0, 0, 4.0), (1, 0, 1.0), (1, 1, 3.0), (2, 1, 2.0), (2, 2, 5.0)],
        )
        .unwrap()
    }

    #[test]
    fn build_and_lookup() {
        let a = small();
        assert_eq!(a.n(), 3);
        assert_eq!(a.nnz(), 5);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(1, 0), 1.0);
        assert_eq!(a.get(2, 0), 0.0);
    }

    #[test]
    fn upper_entries_mirrored_and_summed() {
        // same matrix given as upper triangle plus a duplicate
        let a = SymSparseMatrix::from_triplets(
            3,
            vec![
                (0, 0, 4.0),
                (0, 1, 0.5),
                (1, 0, 0.5),
                (1, 1, 3.0),
                (1, 2, 2.0),
                (2, 2, 5.0),
            ],
        )
        .unwrap();
        assert_eq!(a, small());
    }

    #[test]
    fn structural_zero_diagonal() {
        let a = SymSparseMatrix::from_triplets(2, vec![(0, 0, 4.0), (1, 0, 1.0)]).unwrap();
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(SymSparseMatrix::from_triplets(2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn matvec_matches_dense() {
        let a = small();
        let d = a.to_dense();
        let x = DenseMatrix::from_rows(&[vec![1.0, -1.0], vec![2.0, 0.5], vec![-3.0, 2.0]]);
        let y = a.matvec(&x);
        let y2 = crate::dense::matmul(&d, &x);
        for i in 0..3 {
            for j in 0..2 {
                assert!((y.at(i, j) - y2.at(i, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn norm_inf_full_rows() {
        let a = small();
        // row sums: 5, 6, 7
        assert_eq!(a.norm_inf(), 7.0);
    }

    #[test]
    fn adjacency_sorted_symmetric() {
        let a = small();
        let g = a.adjacency();
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert_eq!(g.neighbors(2), &[1]);
    }

    #[test]
    fn permute_round_trip() {
        let a = small();
        let p = Permutation::from_new_to_old(vec![2, 0, 1]).unwrap();
        let b = a.permute(&p).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(b.get(i, j), a.get(p.old_index(i), p.old_index(j)));
            }
        }
        let back = b.permute(&p.inverse()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn residual_zero_for_exact_and_zero_input() {
        let a = small();
        let x = DenseMatrix::zeros(3, 1);
        let b = DenseMatrix::zeros(3, 1);
        assert_eq!(relative_residual(&a, &x, &b), vec![0.0]);

        let x = DenseMatrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0]]);
        let b = a.matvec(&x);
        let r = relative_residual(&a, &x, &b);
        assert!(r[0] < 1e-15);
    }

    #[test]
    fn rect_ops_match_dense() {
        let r = RectSparse::from_triplets(3, 2, vec![(0, 0, 2.0), (2, 0, 1.0), (1, 1, -3.0)])
            .unwrap();
        let x = DenseMatrix::from_rows(&[vec![1.0], vec![2.0]]);
        let mut y = DenseMatrix::zeros(3, 1);
        r.mul_add(&x, &mut y);
        assert_eq!(y.column(0), vec![2.0, -6.0, 1.0]);

        let z = DenseMatrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0]]);
        let mut w = DenseMatrix::zeros(2, 1);
        r.t_mul_add(&z, &mut w);
        assert_eq!(w.column(0), vec![3.0, -3.0]);
    }
}
