//! Numeric scalar abstraction for metric arithmetic.

use std::fmt::Debug;

use num::traits::{Num, ToPrimitive};
use num::{BigInt, BigRational};

/// A number type metrics can be accumulated in: `f32`, `f64` or [`BigRational`].
pub trait Scalar: Num + Clone + PartialOrd + Debug + Send + Sync {
    /// `num / den`, exact when the type allows it.
    fn from_ratio(num: u64, den: u64) -> Self;

    fn as_f64(&self) -> f64;

    fn from_count(n: u64) -> Self {
        Self::from_ratio(n, 1)
    }
}

impl Scalar for f64 {
    fn from_ratio(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }

    fn as_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for f32 {
    fn from_ratio(num: u64, den: u64) -> Self {
        (num as f64 / den as f64) as f32
    }

    fn as_f64(&self) -> f64 {
        f64::from(*self)
    }
}

impl Scalar for BigRational {
    fn from_ratio(num: u64, den: u64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn as_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Arithmetic mean; zero for an empty slice.
pub fn mean<S: Scalar>(values: &[S]) -> S {
    if values.is_empty() {
        return S::zero();
    }
    let total = values.iter().cloned().fold(S::zero(), |acc, v| acc + v);
    total / S::from_count(values.len() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_is_exact_for_rationals() {
        let third = BigRational::from_ratio(1, 3);
        let sum = third.clone() + third.clone() + third;
        assert_eq!(sum, BigRational::from_count(1));
    }

    #[test]
    fn mean_agrees_across_scalars() {
        let exact = mean(&[BigRational::from_ratio(1, 2), BigRational::from_ratio(1, 4)]);
        assert_eq!(exact, BigRational::from_ratio(3, 8));
        let approx = mean(&[0.5f64, 0.25]);
        assert!((approx - exact.as_f64()).abs() < 1e-15);
        let single = mean(&[0.5f32, 0.25]);
        assert!((f64::from(single) - 0.375).abs() < 1e-7);
        assert_eq!(mean::<f64>(&[]), 0.0);
    }
}
