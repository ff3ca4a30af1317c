//! Exact rational helpers shared by the grids, the exact re-simulator and the
//! SMT encoder.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Converts a float through its shortest round-trip decimal form, so `0.3`
/// becomes `3/10` rather than the binary expansion of the nearest double.
pub fn from_f64_decimal(value: f64) -> Result<Rational> {
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("{value}")));
    }
    parse_rational(&format!("{value}"))
}

/// The exact value of a double.
pub fn from_f64_exact(value: f64) -> Result<Rational> {
    Rational::from_float(value).ok_or_else(|| Error::NonFinite(format!("{value}")))
}

/// Parses `"p/q"`, plain integers and decimal literals (`"-0.125"`, `"1e-3"`).
pub fn parse_rational(text: &str) -> Result<Rational> {
    let text = text.trim();
    let bad = || Error::Parse(format!("invalid rational literal {text:?}"));
    if let Some((num, den)) = text.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| bad())?;
        let den: BigInt = den.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(num, den));
    }
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => {
            let exp: i32 = text[pos + 1..].parse().map_err(|_| bad())?;
            (&text[..pos], exp)
        }
        None => (text, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all_digits = format!("{whole}{frac}");
    let numer: BigInt = if all_digits.is_empty() {
        BigInt::zero()
    } else {
        all_digits.parse().map_err(|_| bad())?
    };
    let scale = exponent - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut value = if scale >= 0 {
        Rational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    if negative {
        value = -value;
    }
    Ok(value)
}

/// `"p/q"`, or just `"p"` for integers.
pub fn format_rational(value: &Rational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// SMT-LIB2 literal: `(/ 3 4)`, `(- (/ 1 2))`, `5`, `(- 5)`.
pub fn smt_literal(value: &Rational) -> String {
    let abs = value.abs();
    let body = if abs.denom().is_one() {
        abs.numer().to_string()
    } else {
        format!("(/ {} {})", abs.numer(), abs.denom())
    };
    if value.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

/// Exact `floor(value)` as an integer.
pub fn floor_to_i64(value: &Rational) -> i64 {
    let (q, _) = value.numer().div_mod_floor(value.denom());
    q.to_i64().unwrap_or(if value.is_negative() { i64::MIN } else { i64::MAX })
}

pub fn ceil_to_i64(value: &Rational) -> i64 {
    -floor_to_i64(&-value.clone())
}

pub mod serde_str {
    //! Serializes a rational as its `"p/q"` string.
    use super::{format_rational, parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(d)?;
        parse_rational(&text).map_err(serde::de::Error::custom)
    }
}

pub mod serde_str_vec {
    use super::{format_rational, parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(values: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        values
            .iter()
            .map(format_rational)
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let texts = Vec::<String>::deserialize(d)?;
        texts
            .iter()
            .map(|t| parse_rational(t).map_err(serde::de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimal_and_fraction_forms() {
        assert_eq!(parse_rational("0.3").unwrap(), ratio(3, 10));
        assert_eq!(parse_rational("5/8").unwrap(), ratio(5, 8));
        assert_eq!(parse_rational("-0.125").unwrap(), ratio(-1, 8));
        assert_eq!(parse_rational("1e-3").unwrap(), ratio(1, 1000));
        assert_eq!(parse_rational("2.5E1").unwrap(), int(25));
        assert_eq!(parse_rational(".5").unwrap(), ratio(1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn shortest_decimal_conversion() {
        assert_eq!(from_f64_decimal(0.3).unwrap(), ratio(3, 10));
        assert_eq!(from_f64_decimal(0.5).unwrap(), ratio(1, 2));
        assert!(from_f64_decimal(f64::NAN).is_err());
    }

    #[test]
    fn smt_literals() {
        assert_eq!(smt_literal(&ratio(3, 4)), "(/ 3 4)");
        assert_eq!(smt_literal(&ratio(-1, 2)), "(- (/ 1 2))");
        assert_eq!(smt_literal(&int(7)), "7");
        assert_eq!(smt_literal(&int(0)), "0");
    }

    #[test]
    fn floor_and_ceil() {
        assert_eq!(floor_to_i64(&ratio(7, 2)), 3);
        assert_eq!(floor_to_i64(&ratio(-7, 2)), -4);
        assert_eq!(ceil_to_i64(&ratio(7, 2)), 4);
        assert_eq!(ceil_to_i64(&int(2)), 2);
    }
}
