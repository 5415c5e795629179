//! Row-major dense matrices. Used for right-hand-side panels, interface
//! blocks, and the packed dense factors. Row-major layout makes multi-column
//! substitution sweeps contiguous: row i holds all right-hand sides of
//! variable i.

use num_traits::Zero;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    /// Build from row slices; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        DenseMatrix { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
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
    pub fn at(&self, i: usize, j: usize) -> T {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Mutable access to two distinct rows at once.
    pub fn rows_pair_mut(&mut self, i: usize, j: usize) -> (&mut [T], &mut [T]) {
        assert_ne!(i, j);
        let c = self.cols;
        if i < j {
            let (lo, hi) = self.data.split_at_mut(j * c);
            (&mut lo[i * c..(i + 1) * c], &mut hi[..c])
        } else {
            let (lo, hi) = self.data.split_at_mut(i * c);
            let (a, b) = (&mut hi[..c], &mut lo[j * c..(j + 1) * c]);
            (a, b)
        }
    }

    /// row(dst) += c * row(src); dst != src.
    #[inline]
    pub fn axpy_rows(&mut self, dst: usize, src: usize, c: T) {
        let (d, s) = self.rows_pair_mut(dst, src);
        axpy(d, s, c);
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.at(i, j)).collect()
    }

    /// Max row sum of entry moduli (the ∞ operator norm).
    pub fn norm_inf(&self) -> T::Real {
        let mut best = T::Real::zero();
        for i in 0..self.rows {
            let s: T::Real = self.row(i).iter().map(|x| x.modulus()).sum();
            if s > best {
                best = s;
            }
        }
        best
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> T::Real {
        let mut best = T::Real::zero();
        for x in &self.data {
            let m = x.modulus();
            if m > best {
                best = m;
            }
        }
        best
    }

    pub fn fill_zero(&mut self) {
        self.data.fill(T::zero());
    }

    /// self -= a * bᵀ (a: m×k, b: n×k, self: m×n).
    pub fn sub_mul_nt(&mut self, a: &DenseMatrix<T>, b: &DenseMatrix<T>) {
        assert_eq!(a.rows, self.rows);
        assert_eq!(b.rows, self.cols);
        assert_eq!(a.cols, b.cols);
        for i in 0..self.rows {
            let arow = a.row(i);
            let crow = self.row_mut(i);
            for j in 0..b.rows {
                crow[j] -= dot(arow, b.row(j));
            }
        }
    }

    /// self -= a * b (a: m×k, b: k×n, self: m×n).
    pub fn sub_mul_nn(&mut self, a: &DenseMatrix<T>, b: &DenseMatrix<T>) {
        assert_eq!(a.rows, self.rows);
        assert_eq!(b.cols, self.cols);
        assert_eq!(a.cols, b.rows);
        for i in 0..self.rows {
            let arow = a.row(i);
            let crow = self.row_mut(i);
            for (k, &aik) in arow.iter().enumerate() {
                if aik == T::zero() {
                    continue;
                }
                let brow = b.row(k);
                for j in 0..brow.len() {
                    crow[j] -= aik * brow[j];
                }
            }
        }
    }

    /// self -= aᵀ * b (a: k×m, b: k×n, self: m×n).
    pub fn sub_mul_tn(&mut self, a: &DenseMatrix<T>, b: &DenseMatrix<T>) {
        assert_eq!(a.cols, self.rows);
        assert_eq!(b.cols, self.cols);
        assert_eq!(a.rows, b.rows);
        for k in 0..a.rows {
            let arow = a.row(k);
            let brow = b.row(k);
            for i in 0..self.rows {
                let aki = arow[i];
                if aki == T::zero() {
                    continue;
                }
                let crow = self.row_mut(i);
                for j in 0..brow.len() {
                    crow[j] -= aki * brow[j];
                }
            }
        }
    }

    /// Bytes of the value storage, for deterministic memory accounting.
    pub fn accounted_bytes(&self) -> u64 {
        self.data.len() as u64 * T::WIDTH
    }
}

/// Plain product for tests and small oracles.
pub fn matmul<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> DenseMatrix<T> {
    assert_eq!(a.cols(), b.rows());
    let mut c = DenseMatrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for k in 0..a.cols() {
            let aik = a.at(i, k);
            if aik == T::zero() {
                continue;
            }
            let brow = b.row(k);
            let crow = c.row_mut(i);
            for j in 0..brow.len() {
                crow[j] += aik * brow[j];
            }
        }
    }
    c
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut s = T::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        s += *x * *y;
    }
    s
}

#[inline]
pub fn axpy<T: Scalar>(y: &mut [T], x: &[T], c: T) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += c * *xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn layout_and_access() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        assert_eq!(m.rows(), 3);
        assert_eq!(m.cols(), 2);
        assert_eq!(m.at(2, 1), 6.0);
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert_eq!(m.column(0), vec![1.0, 3.0, 5.0]);
        let t = m.transpose();
        assert_eq!(t.at(1, 2), 6.0);
    }

    #[test]
    fn pair_rows_and_axpy() {
        let mut m = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![2.0, 1.0]]);
        m.axpy_rows(0, 1, 10.0);
        assert_eq!(m.row(0), &[21.0, 10.0]);
        let (a, b) = m.rows_pair_mut(1, 0);
        assert_eq!(a, &[2.0, 1.0]);
        assert_eq!(b, &[21.0, 10.0]);
    }

    #[test]
    fn matmul_small() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = DenseMatrix::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]);
        let c = matmul(&a, &b);
        assert_eq!(c.row(0), &[19.0, 22.0]);
        assert_eq!(c.row(1), &[43.0, 50.0]);
    }

    #[test]
    fn sub_mul_nt_matches_matmul() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        let b = DenseMatrix::from_rows(&[vec![1.0, 1.0, 1.0], vec![2.0, 0.0, 1.0]]);
        let mut c = DenseMatrix::zeros(2, 2);
        c.sub_mul_nt(&a, &b);
        let expect = matmul(&a, &b.transpose());
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(c.at(i, j), -expect.at(i, j));
            }
        }
    }

    #[test]
    fn complex_norms() {
        let m = DenseMatrix::from_rows(&[
            vec![Complex64::new(3.0, 4.0), Complex64::new(0.0, 1.0)],
            vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        ]);
        assert_eq!(m.norm_inf(), 6.0);
        assert_eq!(m.max_abs(), 5.0);
    }
}
