//! Closed rational intervals for depth-truncated quantities.
//!
//! A [`CertifiedValue`] `[lo, hi]` asserts that the true value of the
//! quantity lies in the interval.  Exact quantities have `lo == hi`.
//! Truncation error (mass that escapes the finite-depth tower model and
//! whose fate is not determined by the stored construction data) is always
//! charged to the interval width, never redistributed.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::fmt;

/// Exact rational scalar.
pub type Rat = BigRational;

/// Convenience constructor for a rational from two machine integers.
pub fn rat(num: i64, den: i64) -> Rat {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Closed interval `[lo, hi]` of rationals with `lo <= hi`.
#[derive(Clone, PartialEq, Eq)]
pub struct CertifiedValue {
    lo: Rat,
    hi: Rat,
}

impl CertifiedValue {
    /// Interval with the given endpoints.  Panics if `lo > hi`.
    pub fn new(lo: Rat, hi: Rat) -> Self {
        assert!(lo <= hi, "certified interval with lo > hi");
        CertifiedValue { lo, hi }
    }

    /// Exact value: `lo == hi`.
    pub fn exact(v: Rat) -> Self {
        CertifiedValue { lo: v.clone(), hi: v }
    }

    pub fn zero() -> Self {
        Self::exact(Rat::zero())
    }

    pub fn one() -> Self {
        Self::exact(Rat::one())
    }

    pub fn lo(&self) -> &Rat {
        &self.lo
    }

    pub fn hi(&self) -> &Rat {
        &self.hi
    }

    pub fn width(&self) -> Rat {
        &self.hi - &self.lo
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    /// Midpoint, for reporting only.
    pub fn mid(&self) -> Rat {
        (&self.lo + &self.hi) / rat(2, 1)
    }

    pub fn contains_value(&self, v: &Rat) -> bool {
        &self.lo <= v && v <= &self.hi
    }

    pub fn contains(&self, other: &CertifiedValue) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersects(&self, other: &CertifiedValue) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn intersect(&self, other: &CertifiedValue) -> Option<CertifiedValue> {
        let lo = self.lo.clone().max(other.lo.clone());
        let hi = self.hi.clone().min(other.hi.clone());
        if lo <= hi {
            Some(CertifiedValue { lo, hi })
        } else {
            None
        }
    }

    pub fn hull(&self, other: &CertifiedValue) -> CertifiedValue {
        CertifiedValue {
            lo: self.lo.clone().min(other.lo.clone()),
            hi: self.hi.clone().max(other.hi.clone()),
        }
    }

    pub fn add(&self, other: &CertifiedValue) -> CertifiedValue {
        CertifiedValue {
            lo: &self.lo + &other.lo,
            hi: &self.hi + &other.hi,
        }
    }

    pub fn sub(&self, other: &CertifiedValue) -> CertifiedValue {
        CertifiedValue {
            lo: &self.lo - &other.hi,
            hi: &self.hi - &other.lo,
        }
    }

    /// Scale by an exact nonnegative rational.
    pub fn scale(&self, s: &Rat) -> CertifiedValue {
        assert!(!s.is_negative(), "scale expects a nonnegative factor");
        CertifiedValue {
            lo: &self.lo * s,
            hi: &self.hi * s,
        }
    }

    /// Interval product for factors known to be nonnegative.
    pub fn mul_nonneg(&self, other: &CertifiedValue) -> CertifiedValue {
        debug_assert!(!self.lo.is_negative() && !other.lo.is_negative());
        CertifiedValue {
            lo: &self.lo * &other.lo,
            hi: &self.hi * &other.hi,
        }
    }

    /// Interval quotient.  `None` if the denominator interval contains 0.
    pub fn div(&self, den: &CertifiedValue) -> Option<CertifiedValue> {
        if !den.lo.is_positive() && !den.hi.is_negative() {
            return None;
        }
        let corners = [
            &self.lo / &den.lo,
            &self.lo / &den.hi,
            &self.hi / &den.lo,
            &self.hi / &den.hi,
        ];
        let lo = corners.iter().min().unwrap().clone();
        let hi = corners.iter().max().unwrap().clone();
        Some(CertifiedValue { lo, hi })
    }

    /// Sum of a sequence of intervals.
    pub fn sum<'a, I: IntoIterator<Item = &'a CertifiedValue>>(items: I) -> CertifiedValue {
        let mut acc = CertifiedValue::zero();
        for it in items {
            acc = acc.add(it);
        }
        acc
    }
}

impl fmt::Debug for CertifiedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_exact() {
            write!(f, "[{}]", self.lo)
        } else {
            write!(f, "[{}, {}]", self.lo, self.hi)
        }
    }
}

impl fmt::Display for CertifiedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Decimal rendering of a rational, for human-readable reports only.
pub fn approx_decimal(r: &Rat, digits: u32) -> String {
    let scale = BigInt::from(10u32).pow(digits);
    let scaled = r * Rat::from_integer(scale.clone());
    let rounded = scaled.round().to_integer();
    let neg = rounded.is_negative();
    let abs = rounded.abs();
    let (int_part, frac_part) = (abs.clone() / &scale, abs % &scale);
    let frac_str = format!("{:0width$}", frac_part, width = digits as usize);
    format!("{}{}.{}", if neg { "-" } else { "" }, int_part, frac_str)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_ops() {
        let a = CertifiedValue::new(rat(1, 3), rat(1, 2));
        let b = CertifiedValue::new(rat(1, 6), rat(1, 6));
        assert!(b.is_exact());
        let s = a.add(&b);
        assert_eq!(s.lo(), &rat(1, 2));
        assert_eq!(s.hi(), &rat(2, 3));
        assert!(a.intersects(&s));
        assert!(s.hull(&a).contains(&a));
        let q = a.div(&CertifiedValue::exact(rat(2, 1))).unwrap();
        assert_eq!(q.lo(), &rat(1, 6));
        assert_eq!(q.hi(), &rat(1, 4));
        assert!(a.div(&CertifiedValue::new(rat(-1, 1), rat(1, 1))).is_none());
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(approx_decimal(&rat(1, 3), 4), "0.3333");
        assert_eq!(approx_decimal(&rat(-1, 2), 2), "-0.50");
        assert_eq!(approx_decimal(&rat(3, 2), 3), "1.500");
    }
}
