//! Exact score arithmetic.
//!
//! All grading math runs on reduced rationals so a score computed on one
//! machine is bit-for-bit the score computed on any other. Values only become
//! decimals when they are rendered.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

/// Largest number of fractional digits accepted when parsing a decimal.
const MAX_FRACTION_DIGITS: usize = 9;
/// Largest number of integer digits accepted when parsing.
const MAX_INTEGER_DIGITS: usize = 12;

/// An exact, possibly negative, number of points.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Points(Ratio<i128>);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid points value {input:?}: {reason}")]
pub struct PointsParseError {
    input: String,
    reason: &'static str,
}

impl Points {
    pub const ZERO: Points = Points(Ratio::new_raw(0, 1));

    pub fn from_integer(n: i64) -> Self {
        Points(Ratio::from_integer(n as i128))
    }

    /// `numer / denom`. Panics on a zero denominator.
    pub fn ratio(numer: i64, denom: i64) -> Self {
        Points(Ratio::new(numer as i128, denom as i128))
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

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    /// Rounds to two decimal places, halves away from zero.
    pub fn round_2dp(self) -> Points {
        let hundred = Ratio::from_integer(100);
        Points((self.0 * hundred).round() / hundred)
    }

    /// Renders with exactly two decimals after rounding, e.g. `7.00`, `-10.00`.
    pub fn fmt_2dp(self) -> String {
        let cents = (self.round_2dp().0 * Ratio::from_integer(100)).to_integer();
        let sign = if cents < 0 { "-" } else { "" };
        let abs = cents.abs();
        format!("{sign}{}.{:02}", abs / 100, abs % 100)
    }

    /// Number of decimal digits needed to write this value exactly, when that
    /// fits the parser's precision.
    fn terminating_scale(&self) -> Option<u32> {
        let mut d = self.denom();
        let (mut twos, mut fives) = (0u32, 0u32);
        while d % 2 == 0 {
            d /= 2;
            twos += 1;
        }
        while d % 5 == 0 {
            d /= 5;
            fives += 1;
        }
        let scale = twos.max(fives);
        (d == 1 && scale as usize <= MAX_FRACTION_DIGITS).then_some(scale)
    }
}

impl fmt::Display for Points {
    /// Shortest exact decimal when one exists, `numer/denom` otherwise.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.terminating_scale() {
            Some(0) => write!(f, "{}", self.numer()),
            Some(scale) => {
                let pow = 10i128.pow(scale);
                let scaled = self.numer() * (pow / self.denom());
                let sign = if scaled < 0 { "-" } else { "" };
                let abs = scaled.abs();
                let frac = format!("{:0width$}", abs % pow, width = scale as usize);
                write!(f, "{sign}{}.{}", abs / pow, frac.trim_end_matches('0'))
            }
            None => write!(f, "{}/{}", self.numer(), self.denom()),
        }
    }
}

impl fmt::Debug for Points {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Points({self})")
    }
}

impl FromStr for Points {
    type Err = PointsParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason| PointsParseError {
            input: s.to_string(),
            reason,
        };
        let t = s.trim();
        if let Some((n, d)) = t.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|_| err("bad numerator"))?;
            let d: i64 = d.trim().parse().map_err(|_| err("bad denominator"))?;
            if d == 0 {
                return Err(err("zero denominator"));
            }
            return Ok(Points::ratio(n, d));
        }
        let (negative, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t.strip_prefix('+').unwrap_or(t)),
        };
        let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err("empty"));
        }
        if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(err("not a decimal number"));
        }
        if int_part.len() > MAX_INTEGER_DIGITS || frac_part.len() > MAX_FRACTION_DIGITS {
            return Err(err("too many digits"));
        }
        let digits = format!("{int_part}{frac_part}");
        let mut numer: i128 = if digits.is_empty() { 0 } else { digits.parse().map_err(|_| err("not a decimal number"))? };
        if negative {
            numer = -numer;
        }
        let denom = 10i128.pow(frac_part.len() as u32);
        Ok(Points(Ratio::new(numer, denom)))
    }
}

impl Serialize for Points {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Points {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct Visitor;

        impl de::Visitor<'_> for Visitor {
            type Value = Points;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a decimal number or a \"numer/denom\" string")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Points, E> {
                v.parse().map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Points, E> {
                Ok(Points::from_integer(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Points, E> {
                i64::try_from(v)
                    .map(Points::from_integer)
                    .map_err(|_| E::custom("points value out of range"))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Points, E> {
                // Shortest round-trip repr recovers the literal the client wrote.
                if !v.is_finite() {
                    return Err(E::custom("points must be finite"));
                }
                format!("{v}").parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_any(Visitor)
    }
}

impl Add for Points {
    type Output = Points;
    fn add(self, rhs: Points) -> Points {
        Points(self.0 + rhs.0)
    }
}

impl AddAssign for Points {
    fn add_assign(&mut self, rhs: Points) {
        self.0 += rhs.0;
    }
}

impl Sub for Points {
    type Output = Points;
    fn sub(self, rhs: Points) -> Points {
        Points(self.0 - rhs.0)
    }
}

impl Neg for Points {
    type Output = Points;
    fn neg(self) -> Points {
        Points(-self.0)
    }
}

impl Mul for Points {
    type Output = Points;
    fn mul(self, rhs: Points) -> Points {
        Points(self.0 * rhs.0)
    }
}

impl Mul<u32> for Points {
    type Output = Points;
    fn mul(self, rhs: u32) -> Points {
        Points(self.0 * Ratio::from_integer(rhs as i128))
    }
}

impl Div for Points {
    type Output = Points;
    fn div(self, rhs: Points) -> Points {
        Points(self.0 / rhs.0)
    }
}

impl Sum for Points {
    fn sum<I: Iterator<Item = Points>>(iter: I) -> Points {
        iter.fold(Points::ZERO, Add::add)
    }
}
