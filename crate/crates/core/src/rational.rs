//! Exact rational numbers and their canonical text form.
//!
//! Every probability, payoff and expectation in the crate is a
//! [`Rational`]: arbitrary-precision numerator and denominator, always
//! normalized. The text form is `"a/b"`, or `"a"` when the denominator is 1.

use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = num_rational::BigRational;

/// Parses `"a/b"`, `"a"` or `"-a/b"`. Whitespace around the value is ignored.
pub fn parse(text: &str) -> Option<Rational> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text, "1"),
    };
    let num = BigInt::from_str(num).ok()?;
    let den = BigInt::from_str(den).ok()?;
    if den.is_zero() {
        return None;
    }
    Some(Rational::new(num, den))
}

pub fn format(value: &Rational) -> String {
    value.to_string()
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

pub fn midpoint(a: &Rational, b: &Rational) -> Rational {
    (a + b) / int(2)
}

pub fn half() -> Rational {
    ratio(1, 2)
}

pub fn is_positive(value: &Rational) -> bool {
    value.is_positive()
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

/// A [`Rational`] that (de)serializes as its canonical string.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exact(pub Rational);

impl serde::Serialize for Exact {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        as_string::serialize(&self.0, s)
    }
}

impl<'de> serde::Deserialize<'de> for Exact {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        as_string::deserialize(d).map(Exact)
    }
}

impl From<Rational> for Exact {
    fn from(value: Rational) -> Self {
        Exact(value)
    }
}

/// Serde adapter storing a [`Rational`] as its canonical string.
pub mod as_string {
    use serde::{de, Deserialize, Deserializer, Serializer};

    use super::Rational;

    pub fn serialize<S: Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(d)?;
        super::parse(&text).ok_or_else(|| de::Error::custom(format!("invalid rational {text:?}")))
    }
}

/// Same as [`as_string`] for `Option<Rational>`.
pub mod opt_string {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::Rational;

    pub fn serialize<S: Serializer>(value: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(v) => s.serialize_some(&super::format(v)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        let text = Option::<String>::deserialize(d)?;
        match text {
            None => Ok(None),
            Some(t) => super::parse(&t)
                .map(Some)
                .ok_or_else(|| serde::de::Error::custom(format!("invalid rational {t:?}"))),
        }
    }
}

/// Same as [`as_string`] for sequences.
pub mod vec_string {
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    use super::Rational;

    pub fn serialize<S: Serializer>(values: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(values.len()))?;
        for v in values {
            seq.serialize_element(&super::format(v))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        Vec::<String>::deserialize(d)?
            .into_iter()
            .map(|t| super::parse(&t).ok_or_else(|| serde::de::Error::custom(format!("invalid rational {t:?}"))))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_normalizes() {
        assert_eq!(parse("2/4"), Some(ratio(1, 2)));
        assert_eq!(parse("-1/3"), Some(ratio(-1, 3)));
        assert_eq!(parse(" 5 "), Some(int(5)));
        assert_eq!(parse("1/-3"), Some(ratio(-1, 3)));
    }

    #[test]
    fn rejects_malformed() {
        assert_eq!(parse(""), None);
        assert_eq!(parse("1/0"), None);
        assert_eq!(parse("0.5"), None);
        assert_eq!(parse("a/b"), None);
        assert_eq!(parse("1/2/3"), None);
    }

    #[test]
    fn canonical_text() {
        assert_eq!(format(&ratio(-2, 6)), "-1/3");
        assert_eq!(format(&int(7)), "7");
        assert_eq!(format(&ratio(0, 5)), "0");
    }
}
