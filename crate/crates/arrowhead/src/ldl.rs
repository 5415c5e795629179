//! Sparse LDLᵀ with 1×1 pivots, up-looking over the elimination tree. One
//! kernel serves both the per-subdomain interior factorizations and the
//! whole-matrix reference path, so the two are numerically comparable
//! entry-for-entry.
//!
//! Tiny pivots are not refused: a pivot d with |d| < τ·‖A‖∞ is replaced by
//! sign(d)·τ·‖A‖∞ and the event is recorded, so factorization always
//! completes and callers can judge the damage from the residual.

use num_traits::{FromPrimitive, Zero};

use crate::dense::DenseMatrix;
use crate::order::{FillOrdering, Permutation};
use crate::scalar::Scalar;
use crate::sparse::SymSparseMatrix;

/// Relative pivot perturbation threshold τ.
pub const PIVOT_TAU: f64 = 1e-12;

const UNKNOWN: i64 = -1;

#[derive(Debug, Clone)]
pub struct SparseLdlt<T: Scalar> {
    n: usize,
    perm: Permutation,
    lcolptr: Vec<usize>,
    lrowidx: Vec<u32>,
    lvalues: Vec<T>,
    diag: Vec<T>,
    dinv: Vec<T>,
    /// Pivot positions (in factor order) that were perturbed.
    perturbed: Vec<u32>,
}

impl<T: Scalar> SparseLdlt<T> {
    /// Factor A = Pᵀ·L·D·Lᵀ·P with the given fill-reducing ordering.
    pub fn factor(a: &SymSparseMatrix<T>, ordering: FillOrdering) -> SparseLdlt<T> {
        let perm = ordering.compute(&a.adjacency());
        Self::factor_with_perm(a, perm)
    }

    pub fn factor_with_perm(a: &SymSparseMatrix<T>, perm: Permutation) -> SparseLdlt<T> {
        assert_eq!(perm.len(), a.n());
        let anorm = a.norm_inf();
        let ap = a.permute(&perm).expect("permutation length checked above");
        let (ucolptr, urowidx, uvalues) = upper_csc(&ap);
        let n = a.n();

        let (etree, lnz_cols) = etree_and_counts(n, &ucolptr, &urowidx);

        let mut lcolptr = vec![0usize; n + 1];
        for j in 0..n {
            lcolptr[j + 1] = lcolptr[j] + lnz_cols[j];
        }
        let lnz = lcolptr[n];
        let mut lrowidx = vec![0u32; lnz];
        let mut lvalues = vec![T::zero(); lnz];
        let mut diag = vec![T::zero(); n];
        let mut dinv = vec![T::zero(); n];
        let mut perturbed = Vec::new();

        // pivot replacement magnitude; a wholly zero matrix still gets a
        // usable (if meaningless) factor
        let tau = T::Real::from_f64(PIVOT_TAU).unwrap();
        let scale = if anorm > T::Real::zero() { tau * anorm } else { tau };

        // up-looking numeric sweep
        let mut next_in_col = lcolptr[..n].to_vec();
        let mut y_vals = vec![T::zero(); n];
        let mut y_marker = vec![false; n];
        let mut y_idx = vec![0u32; n];
        let mut elim = vec![0u32; n];

        for k in 0..n {
            let mut nnz_y = 0usize;
            let mut dk = T::zero();
            for p in ucolptr[k]..ucolptr[k + 1] {
                let i = urowidx[p] as usize;
                if i == k {
                    dk = uvalues[p];
                    continue;
                }
                debug_assert!(i < k, "matrix not upper triangular");
                y_vals[i] = uvalues[p];
                if !y_marker[i] {
                    // walk the elimination tree toward k, collecting the
                    // unvisited part of the path
                    y_marker[i] = true;
                    let mut nnz_e = 0usize;
                    elim[nnz_e] = i as u32;
                    nnz_e += 1;
                    let mut next = etree[i];
                    while next != UNKNOWN && (next as usize) < k {
                        let nx = next as usize;
                        if y_marker[nx] {
                            break;
                        }
                        y_marker[nx] = true;
                        elim[nnz_e] = next as u32;
                        nnz_e += 1;
                        next = etree[nx];
                    }
                    while nnz_e > 0 {
                        nnz_e -= 1;
                        y_idx[nnz_y] = elim[nnz_e];
                        nnz_y += 1;
                    }
                }
            }

            // eliminate in topological order (reverse of collection)
            for t in (0..nnz_y).rev() {
                let c = y_idx[t] as usize;
                let yc = y_vals[c];
                let (s, e) = (lcolptr[c], next_in_col[c]);
                for p in s..e {
                    y_vals[lrowidx[p] as usize] -= lvalues[p] * yc;
                }
                let lval = yc * dinv[c];
                dk -= yc * lval;
                let slot = next_in_col[c];
                lrowidx[slot] = k as u32;
                lvalues[slot] = lval;
                next_in_col[c] = slot + 1;
                y_vals[c] = T::zero();
                y_marker[c] = false;
            }

            if dk.modulus() < scale {
                dk = dk.signum_dir() * T::from_real(scale);
                perturbed.push(k as u32);
            }
            diag[k] = dk;
            dinv[k] = dk.recip();
        }
        debug_assert_eq!(next_in_col, lcolptr[1..]);

        SparseLdlt { n, perm, lcolptr, lrowidx, lvalues, diag, dinv, perturbed }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored off-diagonal entries of L.
    pub fn lnz(&self) -> usize {
        self.lvalues.len()
    }

    pub fn perturbed(&self) -> &[u32] {
        &self.perturbed
    }

    pub fn perm(&self) -> &Permutation {
        &self.perm
    }

    /// Pivot values D (in factor order).
    pub fn diag(&self) -> &[T] {
        &self.diag
    }

    /// Factor in CSC parts: (colptr, rowidx, values) of strict-lower L.
    pub fn l_parts(&self) -> (&[usize], &[u32], &[T]) {
        (&self.lcolptr, &self.lrowidx, &self.lvalues)
    }

    /// Solve A·X = B for a panel of right-hand sides.
    pub fn solve(&self, b: &DenseMatrix<T>) -> DenseMatrix<T> {
        assert_eq!(b.rows(), self.n);
        let mut x = gather_rows(&self.perm, b);
        self.solve_permuted_in_place(&mut x);
        scatter_rows_in_place(&self.perm, &mut x);
        x
    }

    /// Sweeps on an already permuted panel (rows in factor order).
    pub fn solve_permuted_in_place(&self, x: &mut DenseMatrix<T>) {
        assert_eq!(x.rows(), self.n);
        // forward: L y = b
        for j in 0..self.n {
            let (s, e) = (self.lcolptr[j], self.lcolptr[j + 1]);
            for p in s..e {
                let r = self.lrowidx[p] as usize;
                let l = self.lvalues[p];
                x.axpy_rows(r, j, -l);
            }
        }
        // diagonal: D z = y
        for j in 0..self.n {
            let d = self.dinv[j];
            for v in x.row_mut(j) {
                *v *= d;
            }
        }
        // backward: Lᵀ x = z
        for j in (0..self.n).rev() {
            let (s, e) = (self.lcolptr[j], self.lcolptr[j + 1]);
            for p in s..e {
                let r = self.lrowidx[p] as usize;
                let l = self.lvalues[p];
                x.axpy_rows(j, r, -l);
            }
        }
    }

    /// Pᵀ·L·D·Lᵀ·P as a dense matrix; testing aid, quadratic in n.
    pub fn reconstruct_dense(&self) -> DenseMatrix<T> {
        let n = self.n;
        let mut ldl = DenseMatrix::zeros(n, n);
        // LDLᵀ in factor order
        for j in 0..n {
            let dj = self.diag[j];
            // column j of L including the unit diagonal
            let mut colj = vec![T::zero(); n];
            colj[j] = T::one();
            for p in self.lcolptr[j]..self.lcolptr[j + 1] {
                colj[self.lrowidx[p] as usize] = self.lvalues[p];
            }
            for r in 0..n {
                if colj[r] == T::zero() {
                    continue;
                }
                let lr = colj[r] * dj;
                for c in 0..n {
                    if colj[c] != T::zero() {
                        *ldl.at_mut(r, c) += lr * colj[c];
                    }
                }
            }
        }
        // undo the permutation: A[old_i][old_j]
        let mut out = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                *out.at_mut(self.perm.old_index(i), self.perm.old_index(j)) = ldl.at(i, j);
            }
        }
        out
    }

    /// Factor storage in bytes: L values + row indices + column pointers +
    /// the two diagonal arrays + permutation.
    pub fn accounted_bytes(&self) -> u64 {
        self.lvalues.len() as u64 * T::WIDTH
            + self.lrowidx.len() as u64 * 4
            + self.lcolptr.len() as u64 * 8
            + 2 * self.diag.len() as u64 * T::WIDTH
            + 2 * self.perm.len() as u64 * 4
    }
}

/// Transpose the lower-triangle CSC into upper-triangle CSC (column j holds
/// rows ≤ j, diagonal last within each column).
fn upper_csc<T: Scalar>(a: &SymSparseMatrix<T>) -> (Vec<usize>, Vec<u32>, Vec<T>) {
    let (n, colptr, rowidx, values) = a.parts();
    let nnz = rowidx.len();
    let mut count = vec![0usize; n + 1];
    for &r in rowidx {
        count[r as usize + 1] += 1;
    }
    for i in 0..n {
        count[i + 1] += count[i];
    }
    let ucolptr = count;
    let mut urowidx = vec![0u32; nnz];
    let mut uvalues = vec![T::zero(); nnz];
    let mut cur = ucolptr[..n].to_vec();
    for c in 0..n {
        for p in colptr[c]..colptr[c + 1] {
            let r = rowidx[p] as usize;
            urowidx[cur[r]] = c as u32;
            uvalues[cur[r]] = values[p];
            cur[r] += 1;
        }
    }
    // columns come out sorted: source columns are visited in ascending order
    (ucolptr, urowidx, uvalues)
}

/// Elimination tree and per-column L counts from the upper-triangle pattern.
fn etree_and_counts(n: usize, ucolptr: &[usize], urowidx: &[u32]) -> (Vec<i64>, Vec<usize>) {
    let mut etree = vec![UNKNOWN; n];
    let mut lnz = vec![0usize; n];
    let mut work = vec![UNKNOWN; n];
    for j in 0..n {
        work[j] = j as i64;
        for p in ucolptr[j]..ucolptr[j + 1] {
            let mut i = urowidx[p] as usize;
            if i == j {
                continue;
            }
            debug_assert!(i < j, "matrix not upper triangular");
            while work[i] != j as i64 {
                if etree[i] == UNKNOWN {
                    etree[i] = j as i64;
                }
                lnz[i] += 1;
                work[i] = j as i64;
                i = etree[i] as usize;
            }
        }
    }
    (etree, lnz)
}

/// New panel with rows gathered into factor order: out[i] = b[perm[i]].
pub fn gather_rows<T: Scalar>(perm: &Permutation, b: &DenseMatrix<T>) -> DenseMatrix<T> {
    assert_eq!(b.rows(), perm.len());
    let mut out = DenseMatrix::zeros(b.rows(), b.cols());
    for i in 0..b.rows() {
        out.row_mut(i).copy_from_slice(b.row(perm.old_index(i)));
    }
    out
}

/// In-place inverse of `gather_rows`: afterwards row perm[i] holds what row
/// i held before. Cycle-following, one spare row of scratch.
pub fn scatter_rows_in_place<T: Scalar>(perm: &Permutation, m: &mut DenseMatrix<T>) {
    let n = perm.len();
    assert_eq!(m.rows(), n);
    let k = m.cols();
    let mut visited = vec![false; n];
    let mut tmp = vec![T::zero(); k];
    let mut tmp2 = vec![T::zero(); k];
    for start in 0..n {
        if visited[start] || perm.old_index(start) == start {
            visited[start] = true;
            continue;
        }
        // move row `start` along its cycle
        tmp.copy_from_slice(m.row(start));
        visited[start] = true;
        let mut dst = perm.old_index(start);
        while dst != start {
            tmp2.copy_from_slice(m.row(dst));
            m.row_mut(dst).copy_from_slice(&tmp);
            std::mem::swap(&mut tmp, &mut tmp2);
            visited[dst] = true;
            dst = perm.old_index(dst);
        }
        m.row_mut(start).copy_from_slice(&tmp);
    }
}
