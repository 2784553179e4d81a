//! Scalar parameters that remember their exact rational value when they have one.
//!
//! Spec documents carry numbers as decimal strings. `"0.45"` parses to the
//! rational 9/20 as well as the nearest `f64`, so closed forms such as
//! `lambda / (1 - lambda)` can be evaluated from integers and come out
//! correctly rounded.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Reduced fraction `num / den` with `den > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    pub num: i128,
    pub den: i128,
}

impl Rational {
    pub fn new(num: i128, den: i128) -> Option<Self> {
        if den == 0 {
            return None;
        }
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()) as i128;
        let g = if g == 0 { 1 } else { g };
        let sign = if den < 0 { -1 } else { 1 };
        Some(Rational {
            num: sign * num / g,
            den: sign * den / g,
        })
    }

    pub fn to_f64(self) -> f64 {
        // Exact when both parts fit in 53 bits; correctly rounded division.
        self.num as f64 / self.den as f64
    }

    pub fn checked_sub(self, other: Rational) -> Option<Rational> {
        let num = self
            .num
            .checked_mul(other.den)?
            .checked_sub(other.num.checked_mul(self.den)?)?;
        Rational::new(num, self.den.checked_mul(other.den)?)
    }

    pub fn checked_add(self, other: Rational) -> Option<Rational> {
        let num = self
            .num
            .checked_mul(other.den)?
            .checked_add(other.num.checked_mul(self.den)?)?;
        Rational::new(num, self.den.checked_mul(other.den)?)
    }

    pub fn checked_div(self, other: Rational) -> Option<Rational> {
        if other.num == 0 {
            return None;
        }
        Rational::new(
            self.num.checked_mul(other.den)?,
            self.den.checked_mul(other.num)?,
        )
    }

    pub fn checked_mul(self, other: Rational) -> Option<Rational> {
        Rational::new(
            self.num.checked_mul(other.num)?,
            self.den.checked_mul(other.den)?,
        )
    }

    pub fn one() -> Rational {
        Rational { num: 1, den: 1 }
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// A real parameter: nearest `f64` plus the exact rational when known.
#[derive(Debug, Clone, Copy)]
pub struct Real {
    value: f64,
    exact: Option<Rational>,
}

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        match (self.exact, other.exact) {
            (Some(a), Some(b)) => a == b,
            _ => self.value == other.value,
        }
    }
}

impl Real {
    pub fn ratio(num: i64, den: i64) -> Real {
        let r = Rational::new(num as i128, den as i128).expect("zero denominator");
        Real::from_rational(r)
    }

    pub fn from_rational(r: Rational) -> Real {
        Real {
            value: r.to_f64(),
            exact: Some(r),
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn exact(&self) -> Option<Rational> {
        self.exact
    }

    pub fn ln(&self) -> f64 {
        if let Some(r) = self.exact {
            if r.num > 0 && r.num < (1i128 << 53) && r.den < (1i128 << 53) {
                return (r.num as f64).ln() - (r.den as f64).ln();
            }
        }
        self.value.ln()
    }

    /// `self / (1 - self)`, exact-then-rounded when rational.
    pub fn odds(&self) -> f64 {
        if let Some(r) = self.exact {
            if let Some(q) = Rational::one()
                .checked_sub(r)
                .and_then(|d| r.checked_div(d))
            {
                return q.to_f64();
            }
        }
        self.value / (1.0 - self.value)
    }

    /// `ln(1 - self)` for `self < 1`.
    pub fn ln_one_minus(&self) -> f64 {
        if let Some(r) = self.exact {
            if let Some(d) = Rational::one().checked_sub(r) {
                if d.num > 0 && d.num.unsigned_abs() < (1u128 << 53) && d.den < (1i128 << 53) {
                    return (d.num as f64).ln() - (d.den as f64).ln();
                }
            }
        }
        (-self.value).ln_1p()
    }

    pub fn one_minus(&self) -> Real {
        match self.exact.and_then(|r| Rational::one().checked_sub(r)) {
            Some(r) => Real::from_rational(r),
            None => Real::from(1.0 - self.value),
        }
    }

    pub fn div(&self, other: &Real) -> Real {
        match (self.exact, other.exact) {
            (Some(a), Some(b)) => match a.checked_div(b) {
                Some(q) => Real::from_rational(q),
                None => Real::from(self.value / other.value),
            },
            _ => Real::from(self.value / other.value),
        }
    }

    pub fn mul(&self, other: &Real) -> Real {
        match (self.exact, other.exact) {
            (Some(a), Some(b)) => match a.checked_mul(b) {
                Some(q) => Real::from_rational(q),
                None => Real::from(self.value * other.value),
            },
            _ => Real::from(self.value * other.value),
        }
    }

    pub fn sub(&self, other: &Real) -> Real {
        match (self.exact, other.exact) {
            (Some(a), Some(b)) => match a.checked_sub(b) {
                Some(q) => Real::from_rational(q),
                None => Real::from(self.value - other.value),
            },
            _ => Real::from(self.value - other.value),
        }
    }

    pub fn add(&self, other: &Real) -> Real {
        match (self.exact, other.exact) {
            (Some(a), Some(b)) => match a.checked_add(b) {
                Some(q) => Real::from_rational(q),
                None => Real::from(self.value + other.value),
            },
            _ => Real::from(self.value + other.value),
        }
    }

    /// `floor(self * k)` computed in integers when exact.
    pub fn floor_mul(&self, k: i128) -> i128 {
        if let Some(r) = self.exact {
            if let Some(n) = r.num.checked_mul(k) {
                return n.div_euclid(r.den);
            }
        }
        snap_floor(self.value * k as f64)
    }

    /// `ceil(self * k)` computed in integers when exact.
    pub fn ceil_mul(&self, k: i128) -> i128 {
        if let Some(r) = self.exact {
            if let Some(n) = r.num.checked_mul(k) {
                return -(-n).div_euclid(r.den);
            }
        }
        snap_ceil(self.value * k as f64)
    }

    /// `floor(k / self)` computed in integers when exact.
    pub fn floor_div_into(&self, k: i128) -> i128 {
        if let Some(r) = self.exact {
            if r.num > 0 {
                if let Some(n) = r.den.checked_mul(k) {
                    return n.div_euclid(r.num);
                }
            }
        }
        snap_floor(k as f64 / self.value)
    }
}

/// Floor that treats values within `1e-9` relative (at most `1e-6` absolute) of an integer as that integer.
pub(crate) fn snap_floor(x: f64) -> i128 {
    snap_floor_f64(x) as i128
}

/// [`snap_floor`] without leaving `f64`. Values just above an integer already floor to it.
#[inline]
pub(crate) fn snap_floor_f64(x: f64) -> f64 {
    let f = x.floor();
    let up = f + 1.0;
    if up - x <= (1e-9 * up.abs().max(1.0)).min(1e-6) {
        up
    } else {
        f
    }
}

pub(crate) fn snap_ceil(x: f64) -> i128 {
    -snap_floor(-x)
}

impl From<f64> for Real {
    fn from(value: f64) -> Self {
        Real { value, exact: None }
    }
}

impl FromStr for Real {
    type Err = Error;

    fn from_str(s: &str) -> Result<Real> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Parse("empty number".into()));
        }
        if let Some((num, den)) = s.split_once('/') {
            let a: Real = num.parse()?;
            let b: Real = den.parse()?;
            if b.value == 0.0 {
                return Err(Error::Parse(format!("zero denominator in {s:?}")));
            }
            return Ok(a.div(&b));
        }
        let value: f64 = s
            .parse()
            .map_err(|_| Error::Parse(format!("not a number: {s:?}")))?;
        if !value.is_finite() {
            return Err(Error::Parse(format!("non-finite number: {s:?}")));
        }
        Ok(Real {
            value,
            exact: parse_decimal(s),
        })
    }
}

/// Exact rational of a plain decimal literal such as `-12.0345` or `1e-3`.
fn parse_decimal(s: &str) -> Option<Rational> {
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let digits = digits.trim_start_matches('0');
    let mut num: i128 = if digits.is_empty() {
        0
    } else {
        digits.parse().ok()?
    };
    let scale = exp - frac_part.len() as i32;
    let mut den: i128 = 1;
    if scale >= 0 {
        num = num.checked_mul(10i128.checked_pow(scale as u32)?)?;
    } else {
        den = 10i128.checked_pow((-scale) as u32)?;
    }
    if neg {
        num = -num;
    }
    // Keep fractions small enough that integer closed forms cannot overflow.
    let r = Rational::new(num, den)?;
    if r.num.unsigned_abs() > (1u128 << 60) || r.den > (1i128 << 60) {
        return None;
    }
    Some(r)
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.exact {
            Some(r) if r.den == 1 => write!(f, "{}", r.num),
            Some(r) => write!(f, "{}/{}", r.num, r.den),
            None => write!(f, "{:?}", self.value),
        }
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Real, D::Error> {
        struct RealVisitor;

        impl Visitor<'_> for RealVisitor {
            type Value = Real;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a decimal or fraction string, or a number")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Real, E> {
                v.parse().map_err(|e: Error| E::custom(e.to_string()))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Real, E> {
                Ok(Real::from(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Real, E> {
                Ok(Real::ratio(v, 1))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Real, E> {
                Ok(Real::from_rational(Rational::new(v as i128, 1).unwrap()))
            }
        }

        deserializer.deserialize_any(RealVisitor)
    }
}
