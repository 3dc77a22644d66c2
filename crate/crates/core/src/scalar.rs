//! Numeric field abstraction shared by the float and exact-rational code paths.

use std::fmt::Debug;
use std::hash::Hash;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

/// Arbitrary-precision rational used in exact mode.
pub type Rational = BigRational;

/// Tolerances used by the solver and the structural checks.
///
/// In exact mode every tolerance is zero, so comparisons become exact.
#[derive(Clone, Debug, PartialEq)]
pub struct Tolerances<T> {
    /// Absolute residual allowed on equality constraints.
    pub feas: T,
    /// Reduced-cost optimality threshold.
    pub opt: T,
    /// Complementary-slackness product threshold.
    pub comp: T,
    /// Strict-complementarity positivity threshold.
    pub strict: T,
    /// Smallest acceptable pivot magnitude.
    pub pivot: T,
    /// Masses at or below this are treated as absent from a support.
    pub support: T,
}

/// An ordered field the LP machinery can run over.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// True when arithmetic is exact.
    const EXACT: bool;

    /// Hashable identity used to deduplicate coordinates.
    type Key: Clone + Eq + Hash + Ord + Debug + Send + Sync;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(v: f64) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    fn to_f64(&self) -> f64;
    fn is_zero(&self) -> bool;

    /// Quantized identity at `resolution` (ignored in exact mode).
    fn key(&self, resolution: f64) -> Self::Key;

    /// The quantization cell `off` steps away from `key` (identity in exact mode).
    fn shift_key(key: &Self::Key, off: i64) -> Self::Key;

    fn tolerances() -> Tolerances<Self>;

    /// Parse a `"p/q"` or decimal literal.
    fn parse_exact(s: &str) -> Option<Self>;

    /// Lossless text form (`"p/q"` in exact mode, shortest round-trip decimal otherwise).
    fn to_exact_string(&self) -> String;

    fn abs(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    fn from_usize(n: usize) -> Self {
        Self::from_ratio(n as i64, 1)
    }

    fn max_of(a: &Self, b: &Self) -> Self {
        if a >= b {
            a.clone()
        } else {
            b.clone()
        }
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;
    type Key = i64;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn key(&self, resolution: f64) -> i64 {
        (*self / resolution).round() as i64
    }
    fn shift_key(key: &i64, off: i64) -> i64 {
        key + off
    }
    fn tolerances() -> Tolerances<f64> {
        Tolerances {
            feas: 1e-9,
            opt: 1e-9,
            comp: 1e-9,
            strict: 1e-10,
            pivot: 1e-9,
            support: 1e-12,
        }
    }
    fn parse_exact(s: &str) -> Option<Self> {
        match s.split_once('/') {
            Some((p, q)) => {
                let p: f64 = p.trim().parse().ok()?;
                let q: f64 = q.trim().parse().ok()?;
                (q != 0.0).then(|| p / q)
            }
            None => s.trim().parse().ok(),
        }
    }
    fn to_exact_string(&self) -> String {
        format!("{self:?}")
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;
    type Key = Rational;

    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_f64(v: f64) -> Self {
        // Every finite double is a dyadic rational, so this conversion is exact.
        BigRational::from_float(v).expect("finite coordinate")
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn key(&self, _resolution: f64) -> Rational {
        self.clone()
    }
    fn shift_key(key: &Rational, _off: i64) -> Rational {
        key.clone()
    }
    fn tolerances() -> Tolerances<Rational> {
        let z = <Rational as Zero>::zero();
        Tolerances {
            feas: z.clone(),
            opt: z.clone(),
            comp: z.clone(),
            strict: z.clone(),
            pivot: z.clone(),
            support: z,
        }
    }
    fn parse_exact(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Ok(r) = BigRational::from_str(s) {
            return Some(r);
        }
        // Plain decimals such as "0.25" are read as their exact decimal value.
        let (int_part, frac_part) = s.split_once('.')?;
        let negative = int_part.starts_with('-');
        let digits = format!("{}{}", int_part.trim_start_matches(['-', '+']), frac_part);
        let numer = BigInt::from_str(&digits).ok()?;
        let denom = num::pow(BigInt::from(10), frac_part.len());
        let r = BigRational::new(numer, denom);
        Some(if negative { -r } else { r })
    }
    fn to_exact_string(&self) -> String {
        if self.is_integer() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
}

/// `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rationals_and_decimals() {
        assert_eq!(Rational::parse_exact("1/3"), Some(Rational::from_ratio(1, 3)));
        assert_eq!(Rational::parse_exact("0.25"), Some(Rational::from_ratio(1, 4)));
        assert_eq!(Rational::parse_exact("-1.5"), Some(Rational::from_ratio(-3, 2)));
        assert_eq!(Rational::parse_exact("2"), Some(Rational::from_ratio(2, 1)));
        assert_eq!(f64::parse_exact("1/4"), Some(0.25));
        assert_eq!(f64::parse_exact("x"), None);
    }

    #[test]
    fn float_to_rational_is_exact() {
        let r = Rational::from_f64(0.1);
        assert_eq!(Scalar::to_f64(&r), 0.1);
        assert_ne!(r, Rational::from_ratio(1, 10));
    }

    #[test]
    fn exact_string_round_trip() {
        let r = Rational::from_ratio(-7, 12);
        assert_eq!(r.to_exact_string(), "-7/12");
        assert_eq!(Rational::parse_exact(&r.to_exact_string()), Some(r));
    }
}
