//! Exact currency arithmetic.
//!
//! [`Money`] is a rational number over `i128`. Every operation is exact;
//! an overflow of the underlying integers panics instead of rounding.
//! [`Price`] extends it with a `+∞` sentinel that sorts above every finite
//! amount and never participates in arithmetic except through the
//! explicitly saturating helpers.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseMoneyError {
    #[error("invalid amount {0:?}")]
    Invalid(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
}

/// An exact rational amount of abstract currency.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(Ratio<i128>);

impl Money {
    pub const ZERO: Money = Money(Ratio::new_raw(0, 1));
    pub const ONE: Money = Money(Ratio::new_raw(1, 1));

    pub fn from_int(value: i128) -> Self {
        Money(Ratio::from_integer(value))
    }

    /// `numer / denom`, reduced. Panics on a zero denominator.
    pub fn new(numer: i128, denom: i128) -> Self {
        assert!(denom != 0, "money denominator must be non-zero");
        Money(Ratio::new(numer, denom))
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    /// Multiply by `2^exp` (negative exponents divide).
    pub fn scale_pow2(self, exp: i32) -> Self {
        let factor = Money::from_int(1i128.checked_shl(exp.unsigned_abs()).expect("money overflow: 2^exp"));
        if exp >= 0 {
            self * factor
        } else {
            self / factor
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Smallest `t ≥ 0` with `2^t ≥ self`.
    pub fn ceil_log2(&self) -> u32 {
        let mut t = 0u32;
        let mut power = Money::ONE;
        while power < *self {
            power = power * Money::from_int(2);
            t += 1;
        }
        t
    }

    pub fn max(self, other: Money) -> Money {
        std::cmp::max(self, other)
    }

    pub fn checked_add(self, rhs: Money) -> Option<Money> {
        self.0.checked_add(&rhs.0).map(Money)
    }

    pub fn checked_sub(self, rhs: Money) -> Option<Money> {
        self.0.checked_sub(&rhs.0).map(Money)
    }

    pub fn checked_mul(self, rhs: Money) -> Option<Money> {
        self.0.checked_mul(&rhs.0).map(Money)
    }
}

impl Default for Money {
    fn default() -> Self {
        Money::ZERO
    }
}

impl From<i64> for Money {
    fn from(v: i64) -> Self {
        Money::from_int(v as i128)
    }
}

impl From<u64> for Money {
    fn from(v: u64) -> Self {
        Money::from_int(v as i128)
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0.checked_add(&rhs.0).expect("money overflow in addition"))
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0.checked_sub(&rhs.0).expect("money overflow in subtraction"))
    }
}

impl Mul for Money {
    type Output = Money;
    fn mul(self, rhs: Money) -> Money {
        Money(self.0.checked_mul(&rhs.0).expect("money overflow in multiplication"))
    }
}

impl Div for Money {
    type Output = Money;
    fn div(self, rhs: Money) -> Money {
        assert!(!rhs.is_zero(), "money division by zero");
        Money(self.0.checked_div(&rhs.0).expect("money overflow in division"))
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        *self = *self + rhs;
    }
}

impl SubAssign for Money {
    fn sub_assign(&mut self, rhs: Money) {
        *self = *self - rhs;
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, |acc, m| acc + m)
    }
}

impl<'a> Sum<&'a Money> for Money {
    fn sum<I: Iterator<Item = &'a Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, |acc, m| acc + *m)
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Money {
    type Err = ParseMoneyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let parse = |t: &str| t.trim().parse::<i128>().map_err(|_| ParseMoneyError::Invalid(s.to_string()));
        match s.split_once('/') {
            Some((n, d)) => {
                let (n, d) = (parse(n)?, parse(d)?);
                if d == 0 {
                    return Err(ParseMoneyError::ZeroDenominator(s.to_string()));
                }
                Ok(Money::new(n, d))
            }
            None => Ok(Money::from_int(parse(s)?)),
        }
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A finite amount or the `+∞` sentinel.
///
/// Used for marginal costs past a supply limit and for posted prices of
/// copies that cannot be produced. Ordered with every finite value below
/// `Infinite`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Price {
    Finite(Money),
    Infinite,
}

impl Price {
    pub const ZERO: Price = Price::Finite(Money::ZERO);

    pub fn finite(self) -> Option<Money> {
        match self {
            Price::Finite(m) => Some(m),
            Price::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Price::Infinite)
    }

    pub fn is_finite(&self) -> bool {
        !self.is_infinite()
    }

    /// Saturating sum: anything plus `+∞` is `+∞`.
    pub fn saturating_add(self, rhs: Price) -> Price {
        match (self, rhs) {
            (Price::Finite(a), Price::Finite(b)) => Price::Finite(a + b),
            _ => Price::Infinite,
        }
    }

    /// Multiply a finite price by a positive factor; `+∞` stays `+∞`.
    pub fn scale(self, factor: Money) -> Price {
        debug_assert!(factor.is_positive());
        match self {
            Price::Finite(m) => Price::Finite(m * factor),
            Price::Infinite => Price::Infinite,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Price::Finite(m) => m.to_f64(),
            Price::Infinite => f64::INFINITY,
        }
    }
}

impl From<Money> for Price {
    fn from(m: Money) -> Self {
        Price::Finite(m)
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Price::Finite(m) => write!(f, "{m}"),
            Price::Infinite => f.write_str("inf"),
        }
    }
}

impl fmt::Debug for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Price {
    type Err = ParseMoneyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "+inf" | "∞" => Ok(Price::Infinite),
            other => other.parse().map(Price::Finite),
        }
    }
}

impl Serialize for Price {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Price {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl One for Money {
    fn one() -> Self {
        Money::ONE
    }
}

impl Zero for Money {
    fn zero() -> Self {
        Money::ZERO
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}
