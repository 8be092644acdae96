use alloc::string::{String, ToString};
use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use core::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::ParseNumberError;

/// An exact dyadic rational `numerator · 2^-exponent`.
///
/// Values are kept canonical: either the exponent is zero or the numerator
/// is odd. Equality and hashing therefore compare representations directly.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    numerator: BigInt,
    exponent: u64,
}

impl Dyadic {
    pub fn new(numerator: impl Into<BigInt>, exponent: u64) -> Self {
        Self::canonical(numerator.into(), exponent)
    }

    pub fn zero() -> Self {
        Self { numerator: BigInt::zero(), exponent: 0 }
    }

    pub fn one() -> Self {
        Self { numerator: BigInt::one(), exponent: 0 }
    }

    pub fn from_int(value: i64) -> Self {
        Self { numerator: BigInt::from(value), exponent: 0 }
    }

    /// `2^k` for any signed `k`.
    pub fn pow2(k: i64) -> Self {
        if k >= 0 {
            Self { numerator: BigInt::one() << (k as u64), exponent: 0 }
        } else {
            Self { numerator: BigInt::one(), exponent: k.unsigned_abs() }
        }
    }

    fn canonical(mut numerator: BigInt, mut exponent: u64) -> Self {
        if numerator.is_zero() {
            return Self::zero();
        }
        if exponent > 0 {
            let twos = numerator.trailing_zeros().unwrap_or(0).min(exponent);
            if twos > 0 {
                numerator >>= twos;
                exponent -= twos;
            }
        }
        Self { numerator, exponent }
    }

    pub fn numerator(&self) -> &BigInt {
        &self.numerator
    }

    pub fn exponent(&self) -> u64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.numerator.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.numerator.is_positive()
    }

    pub fn abs(&self) -> Self {
        Self { numerator: self.numerator.abs(), exponent: self.exponent }
    }

    /// Multiplies by `2^k`; `k` may be negative.
    pub fn scale_pow2(&self, k: i64) -> Self {
        if k >= 0 {
            let k = k as u64;
            if k <= self.exponent {
                Self { numerator: self.numerator.clone(), exponent: self.exponent - k }
            } else {
                Self { numerator: &self.numerator << (k - self.exponent), exponent: 0 }
            }
        } else {
            Self::canonical(self.numerator.clone(), self.exponent + k.unsigned_abs())
        }
    }

    pub fn double(&self) -> Self {
        self.scale_pow2(1)
    }

    pub fn half(&self) -> Self {
        self.scale_pow2(-1)
    }

    /// Largest multiple of `2^-precision` not exceeding `self`.
    pub fn floor_to(&self, precision: u64) -> Self {
        if self.exponent <= precision {
            return self.clone();
        }
        let shift = self.exponent - precision;
        let floored = self.numerator.div_floor(&(BigInt::one() << shift));
        Self::canonical(floored, precision)
    }

    /// `⌊log2 |self|⌋`, or `None` for zero.
    pub fn floor_log2(&self) -> Option<i64> {
        if self.is_zero() {
            return None;
        }
        Some(self.numerator.abs().bits() as i64 - 1 - self.exponent as i64)
    }

    /// True iff `self ≥ 2^k`.
    pub fn ge_pow2(&self, k: i64) -> bool {
        if !self.is_positive() {
            return false;
        }
        // numerator · 2^-e ≥ 2^k  ⇔  numerator ≥ 2^(k+e)
        let shift = k + self.exponent as i64;
        if shift < 0 {
            return true;
        }
        self.numerator.bits() > shift as u64
    }

    fn align(&self, other: &Self) -> (BigInt, BigInt, u64) {
        match self.exponent.cmp(&other.exponent) {
            Ordering::Equal => (self.numerator.clone(), other.numerator.clone(), self.exponent),
            Ordering::Less => {
                (&self.numerator << (other.exponent - self.exponent), other.numerator.clone(), other.exponent)
            }
            Ordering::Greater => {
                (self.numerator.clone(), &other.numerator << (self.exponent - other.exponent), self.exponent)
            }
        }
    }
}

impl Default for Dyadic {
    fn default() -> Self {
        Self::zero()
    }
}

impl From<i64> for Dyadic {
    fn from(value: i64) -> Self {
        Self::from_int(value)
    }
}

impl From<BigInt> for Dyadic {
    fn from(value: BigInt) -> Self {
        Self { numerator: value, exponent: 0 }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.exponent == other.exponent {
            return self.numerator.cmp(&other.numerator);
        }
        let (a, b, _) = self.align(other);
        a.cmp(&b)
    }
}

impl Add for &Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &Dyadic) -> Dyadic {
        let (a, b, e) = self.align(rhs);
        Dyadic::canonical(a + b, e)
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        &self + &rhs
    }
}

impl AddAssign<&Dyadic> for Dyadic {
    fn add_assign(&mut self, rhs: &Dyadic) {
        *self = &*self + rhs;
    }
}

impl Sub for &Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &Dyadic) -> Dyadic {
        let (a, b, e) = self.align(rhs);
        Dyadic::canonical(a - b, e)
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: Dyadic) -> Dyadic {
        &self - &rhs
    }
}

impl SubAssign<&Dyadic> for Dyadic {
    fn sub_assign(&mut self, rhs: &Dyadic) {
        *self = &*self - rhs;
    }
}

impl Mul for &Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &Dyadic) -> Dyadic {
        Dyadic::canonical(&self.numerator * &rhs.numerator, self.exponent + rhs.exponent)
    }
}

impl Mul for Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: Dyadic) -> Dyadic {
        &self * &rhs
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic { numerator: -self.numerator, exponent: self.exponent }
    }
}

impl Neg for &Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic { numerator: -&self.numerator, exponent: self.exponent }
    }
}

impl core::iter::Sum for Dyadic {
    fn sum<I: Iterator<Item = Dyadic>>(iter: I) -> Self {
        iter.fold(Dyadic::zero(), |acc, x| &acc + &x)
    }
}

impl<'a> core::iter::Sum<&'a Dyadic> for Dyadic {
    fn sum<I: Iterator<Item = &'a Dyadic>>(iter: I) -> Self {
        iter.fold(Dyadic::zero(), |acc, x| &acc + x)
    }
}

/// Serialized form is `m/2^n`.
impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.numerator, self.exponent)
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Accepts `m/2^n`, a plain integer `m`, or `m/d` where `d` is a power of two.
impl FromStr for Dyadic {
    type Err = ParseNumberError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || ParseNumberError(s.to_string());
        match s.split_once('/') {
            None => {
                let m = BigInt::from_str(s).map_err(|_| bad())?;
                Ok(Dyadic::from(m))
            }
            Some((num, den)) => {
                let m = BigInt::from_str(num.trim()).map_err(|_| bad())?;
                let den = den.trim();
                if let Some(exp) = den.strip_prefix("2^") {
                    let n: u64 = exp.parse().map_err(|_| bad())?;
                    Ok(Dyadic::new(m, n))
                } else {
                    let d = BigInt::from_str(den).map_err(|_| bad())?;
                    if !d.is_positive() {
                        return Err(bad());
                    }
                    let tz = d.trailing_zeros().unwrap_or(0);
                    if d != BigInt::one() << tz {
                        return Err(bad());
                    }
                    Ok(Dyadic::new(m, tz))
                }
            }
        }
    }
}

impl Dyadic {
    /// Canonical `m/2^n` text.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> Dyadic {
        s.parse().unwrap()
    }

    #[test]
    fn canonical_form_strips_common_twos() {
        let x = Dyadic::new(12, 4);
        assert_eq!(x.numerator(), &BigInt::from(3));
        assert_eq!(x.exponent(), 2);
        assert_eq!(Dyadic::new(0, 9), Dyadic::zero());
        assert_eq!(Dyadic::new(8, 0).exponent(), 0);
    }

    #[test]
    fn arithmetic_is_exact() {
        assert_eq!(&d("1/2^1") + &d("1/2^2"), d("3/2^2"));
        assert_eq!(&d("1/2^1") - &d("3/2^2"), d("-1/2^2"));
        assert_eq!(&d("3/2^1") * &d("3/2^1"), d("9/2^2"));
        assert_eq!(d("5/2^3").scale_pow2(3), d("5"));
        assert_eq!(d("5").scale_pow2(-2), d("5/2^2"));
    }

    #[test]
    fn ordering_across_exponents() {
        assert!(d("1/2^1") > d("1/2^2"));
        assert!(d("-1/2^1") < d("1/2^10"));
        assert_eq!(d("2/2^2").cmp(&d("1/2^1")), Ordering::Equal);
    }

    #[test]
    fn parse_and_print() {
        assert_eq!(d("3/4"), d("3/2^2"));
        assert_eq!(d("7").to_string(), "7/2^0");
        assert_eq!(d("6/2^2").to_string(), "3/2^1");
        assert!("1/3".parse::<Dyadic>().is_err());
        assert!("x".parse::<Dyadic>().is_err());
    }

    #[test]
    fn powers_and_floor() {
        assert!(d("9/4").ge_pow2(1));
        assert!(!d("9/4").ge_pow2(2));
        assert!(d("1").ge_pow2(0));
        assert!(d("1/2^3").ge_pow2(-3));
        assert!(!d("1/2^3").ge_pow2(-2));
        assert!(!Dyadic::zero().ge_pow2(-100));
        assert_eq!(d("7/2^3").floor_to(1), d("1/2^1"));
        assert_eq!(d("-1/2^3").floor_to(1), d("-1/2^1"));
        assert_eq!(d("9/4").floor_log2(), Some(1));
        assert_eq!(d("1/2^5").floor_log2(), Some(-5));
    }
}
