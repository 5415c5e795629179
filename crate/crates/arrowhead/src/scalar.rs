//! Scalar abstraction over the two supported arithmetic fields: `f64` and
//! complex `f64` pairs. Complex matrices here are complex-*symmetric* (A = Aᵀ,
//! not Hermitian), so nothing in this trait conjugates — `modulus` and friends
//! exist for pivoting and norms only.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::Neg;

use num_complex::Complex64;
use num_traits::{Float, FromPrimitive, Num, NumAssign};

/// Arithmetic field tag, used for I/O headers and memory accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarField {
    Real,
    Complex,
}

/// Element type of all matrices and factors in this crate.
///
/// Implemented for `f64` and `Complex64`. The associated `Real` type carries
/// norms, tolerances, and residuals.
pub trait Scalar:
    Copy
    + Debug
    + Display
    + PartialEq
    + Send
    + Sync
    + Num
    + NumAssign
    + Neg<Output = Self>
    + Sum<Self>
    + 'static
{
    type Real: Float + NumAssign + FromPrimitive + Debug + Display + Send + Sync + Sum<Self::Real> + 'static;

    const FIELD: ScalarField;
    /// Bytes occupied by one scalar (8 for real, 16 for complex).
    const WIDTH: u64;

    fn from_real(re: Self::Real) -> Self;
    fn from_parts(re: Self::Real, im: Self::Real) -> Self;
    fn re(self) -> Self::Real;
    fn im(self) -> Self::Real;
    /// True modulus |x|.
    fn modulus(self) -> Self::Real;
    /// Cheap magnitude |re| + |im| used for pivot comparisons.
    fn mag1(self) -> Self::Real;
    /// x / |x|, or 1 when x = 0. Used to give perturbed pivots a direction.
    fn signum_dir(self) -> Self;
    fn recip(self) -> Self;
}

impl Scalar for f64 {
    type Real = f64;

    const FIELD: ScalarField = ScalarField::Real;
    const WIDTH: u64 = 8;

    #[inline]
    fn from_real(re: f64) -> Self {
        re
    }

    #[inline]
    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }

    #[inline]
    fn re(self) -> f64 {
        self
    }

    #[inline]
    fn im(self) -> f64 {
        0.0
    }

    #[inline]
    fn modulus(self) -> f64 {
        self.abs()
    }

    #[inline]
    fn mag1(self) -> f64 {
        self.abs()
    }

    #[inline]
    fn signum_dir(self) -> Self {
        if self < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    #[inline]
    fn recip(self) -> Self {
        1.0 / self
    }
}

impl Scalar for Complex64 {
    type Real = f64;

    const FIELD: ScalarField = ScalarField::Complex;
    const WIDTH: u64 = 16;

    #[inline]
    fn from_real(re: f64) -> Self {
        Complex64::new(re, 0.0)
    }

    #[inline]
    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }

    #[inline]
    fn re(self) -> f64 {
        self.re
    }

    #[inline]
    fn im(self) -> f64 {
        self.im
    }

    #[inline]
    fn modulus(self) -> f64 {
        self.norm()
    }

    #[inline]
    fn mag1(self) -> f64 {
        self.re.abs() + self.im.abs()
    }

    #[inline]
    fn signum_dir(self) -> Self {
        let m = self.norm();
        if m == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            self / m
        }
    }

    #[inline]
    fn recip(self) -> Self {
        1.0 / self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_accessors() {
        let x = -3.5f64;
        assert_eq!(x.re(), -3.5);
        assert_eq!(x.im(), 0.0);
        assert_eq!(x.modulus(), 3.5);
        assert_eq!(x.mag1(), 3.5);
        assert_eq!(x.signum_dir(), -1.0);
        assert_eq!(0.0f64.signum_dir(), 1.0);
        assert_eq!(f64::WIDTH, 8);
    }

    #[test]
    fn complex_accessors() {
        let z = Complex64::new(3.0, -4.0);
        assert_eq!(z.re(), 3.0);
        assert_eq!(z.im(), -4.0);
        assert_eq!(z.modulus(), 5.0);
        assert_eq!(z.mag1(), 7.0);
        let s = z.signum_dir();
        assert!((s.modulus() - 1.0).abs() < 1e-15);
        assert_eq!(Complex64::new(0.0, 0.0).signum_dir(), Complex64::new(1.0, 0.0));
        assert_eq!(Complex64::WIDTH, 16);
    }

    #[test]
    fn recip_matches_division() {
        let z = Complex64::new(2.0, 1.0);
        let r = z.recip();
        assert!(((z * r) - Complex64::new(1.0, 0.0)).modulus() < 1e-15);
    }
}
