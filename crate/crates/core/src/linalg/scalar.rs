use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Field elements the dense routines run over: `f64` for the fast path and
/// [`BigRational`] for the exact cross-checks.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Exact conversion for rationals (every finite double is dyadic).
    fn from_f64(x: f64) -> Self;
    fn from_usize(k: usize) -> Self {
        Self::from_f64(k as f64)
    }
    fn abs_val(&self) -> Self;
    fn to_f64(&self) -> f64;
    /// Pivots with magnitude at or below this are treated as zero.
    fn pivot_floor(scale: &Self, n: usize) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn abs_val(&self) -> Self {
        self.abs()
    }
    #[inline]
    fn to_f64(&self) -> f64 {
        *self
    }
    fn pivot_floor(scale: &Self, n: usize) -> Self {
        scale * (n.max(1) as f64) * f64::EPSILON * 1e-2
    }
}

impl Scalar for BigRational {
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite value required for exact arithmetic")
    }
    fn from_usize(k: usize) -> Self {
        BigRational::from_integer(BigInt::from(k))
    }
    fn abs_val(&self) -> Self {
        self.abs()
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn pivot_floor(_scale: &Self, _n: usize) -> Self {
        BigRational::zero()
    }
}

/// Relative discrepancy `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs()).max(1e-300);
    if a == b {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Relative error with an absolute floor: `|a-b| / max(1, |a|, |b|)`.
pub fn mixed_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
