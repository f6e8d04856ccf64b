//! Values in `R ∪ {+∞}`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use crate::error::{Error, Result};

/// A real number or `+∞`.
///
/// Backed by an `f64` that is never NaN and never `-∞`; `+∞` is stored as
/// `f64::INFINITY`, so the derived ordering already puts it above every
/// finite value.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct ExtendedValue(f64);

/// Which half of the extended line a value lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Finite,
    PlusInfinity,
}

impl ExtendedValue {
    pub const PLUS_INFINITY: Self = ExtendedValue(f64::INFINITY);
    pub const ZERO: Self = ExtendedValue(0.0);

    /// A finite value. Rejects NaN and both infinities.
    pub fn finite(v: f64) -> Result<Self> {
        if v.is_finite() {
            Ok(ExtendedValue(v))
        } else {
            Err(Error::InvalidValue(format!("{v} is not a finite real")))
        }
    }

    /// Maps `f64::INFINITY` to `+∞`; rejects NaN and `-∞`.
    pub fn from_f64(v: f64) -> Result<Self> {
        if v.is_nan() || v == f64::NEG_INFINITY {
            Err(Error::InvalidValue(format!("{v} is not in R ∪ {{+inf}}")))
        } else {
            Ok(ExtendedValue(v))
        }
    }

    pub fn kind(self) -> Kind {
        if self.0.is_finite() {
            Kind::Finite
        } else {
            Kind::PlusInfinity
        }
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn is_plus_infinity(self) -> bool {
        !self.0.is_finite()
    }

    /// The real value, if finite.
    pub fn value(self) -> Option<f64> {
        self.is_finite().then_some(self.0)
    }

    /// The backing float; `f64::INFINITY` for `+∞`.
    pub fn to_f64(self) -> f64 {
        self.0
    }
}

impl Eq for ExtendedValue {}

impl Ord for ExtendedValue {
    fn cmp(&self, other: &Self) -> Ordering {
        self.partial_cmp(other).expect("ExtendedValue is never NaN")
    }
}

impl Add for ExtendedValue {
    type Output = ExtendedValue;

    /// Finite overflow saturates to `+∞`.
    fn add(self, rhs: Self) -> Self {
        ExtendedValue(self.0 + rhs.0)
    }
}

impl fmt::Display for ExtendedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_finite() {
            write!(f, "{:?}", self.0)
        } else {
            f.write_str("inf")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinity_is_above_every_finite_value() {
        let inf = ExtendedValue::PLUS_INFINITY;
        for v in [f64::MAX, 0.0, -1e300, 1.0] {
            assert!(ExtendedValue::finite(v).unwrap() < inf);
        }
        assert_eq!(inf.kind(), Kind::PlusInfinity);
    }

    #[test]
    fn nan_and_minus_infinity_are_rejected() {
        assert!(ExtendedValue::finite(f64::NAN).is_err());
        assert!(ExtendedValue::finite(f64::INFINITY).is_err());
        assert!(ExtendedValue::from_f64(f64::NAN).is_err());
        assert!(ExtendedValue::from_f64(f64::NEG_INFINITY).is_err());
        assert_eq!(
            ExtendedValue::from_f64(f64::INFINITY).unwrap(),
            ExtendedValue::PLUS_INFINITY
        );
    }

    #[test]
    fn addition_absorbs_infinity() {
        let two = ExtendedValue::finite(2.0).unwrap();
        let three = ExtendedValue::finite(3.0).unwrap();
        assert_eq!((two + three).value(), Some(5.0));
        assert!((two + ExtendedValue::PLUS_INFINITY).is_plus_infinity());
        assert!((ExtendedValue::PLUS_INFINITY + ExtendedValue::PLUS_INFINITY).is_plus_infinity());
    }

    #[test]
    fn display_round_trips() {
        let v = ExtendedValue::finite(0.1 + 0.2).unwrap();
        assert_eq!(v.to_string().parse::<f64>().unwrap(), v.to_f64());
        assert_eq!(ExtendedValue::PLUS_INFINITY.to_string(), "inf");
    }
}
