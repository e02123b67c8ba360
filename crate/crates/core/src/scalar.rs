//! Scalar abstraction for the closed-form models.
//!
//! The analytic formulas only need field arithmetic and ordering, so they are
//! written once against [`Scalar`] and evaluated either in floating point
//! (`f32`/`f64`) or exactly over big rationals.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, ToPrimitive, Zero};

/// Ordered field used by the closed-form models.
pub trait Scalar: Num + Clone + PartialOrd + FromPrimitive + ToPrimitive + Debug {
    /// Small integer constant.
    fn int(v: i64) -> Self {
        Self::from_i64(v).expect("small integer is representable")
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
impl Scalar for BigRational {}

/// Converts a finite `f64` to the rational number with the same shortest
/// decimal representation, so `1e-4` becomes exactly `1/10000` rather than
/// its binary approximation.
pub fn exact_decimal(v: f64) -> Option<BigRational> {
    if !v.is_finite() {
        return None;
    }
    if v == 0.0 {
        return Some(BigRational::zero());
    }
    let text = format!("{v:e}");
    let (mantissa, exponent) = text.split_once('e')?;
    let exponent: i64 = exponent.parse().ok()?;
    let negative = mantissa.starts_with('-');
    let mantissa = mantissa.trim_start_matches('-');
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits: BigInt = format!("{int_part}{frac_part}").parse().ok()?;
    let scale = exponent - frac_part.len() as i64;
    let ten = BigInt::from(10);
    let value = if scale >= 0 {
        BigRational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(digits, num_traits::pow(ten, (-scale) as usize))
    };
    Some(if negative { -value } else { value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_conversion_is_exact() {
        let r = exact_decimal(1e-4).unwrap();
        assert_eq!(r, BigRational::new(1.into(), 10_000.into()));
        let r = exact_decimal(0.015).unwrap();
        assert_eq!(r, BigRational::new(3.into(), 200.into()));
        let r = exact_decimal(1e10).unwrap();
        assert_eq!(r, BigRational::from_integer(10_000_000_000i64.into()));
        let r = exact_decimal(-2.5).unwrap();
        assert_eq!(r, BigRational::new((-5).into(), 2.into()));
        assert!(exact_decimal(f64::NAN).is_none());
    }

    #[test]
    fn min_max_helpers() {
        assert_eq!(f64::min_of(1.0, 2.0), 1.0);
        assert_eq!(f64::max_of(1.0, 2.0), 2.0);
        let a = BigRational::new(1.into(), 3.into());
        let b = BigRational::new(1.into(), 2.into());
        assert_eq!(BigRational::max_of(a.clone(), b.clone()), b);
        assert_eq!(BigRational::min_of(a.clone(), b), a);
    }
}
