//! Exact rational helpers shared by the exact pipelines.

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Parses `"p/q"` or a bare integer `"p"` into a reduced rational.
///
/// The denominator must be strictly positive.
pub fn parse_rational(text: &str) -> Result<BigRational, String> {
    let text = text.trim();
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text, "1"),
    };
    let num: BigInt = num
        .parse()
        .map_err(|_| format!("invalid numerator in rational {text:?}"))?;
    let den: BigInt = den
        .parse()
        .map_err(|_| format!("invalid denominator in rational {text:?}"))?;
    if !den.is_positive() {
        return Err(format!("denominator must be positive in rational {text:?}"));
    }
    Ok(BigRational::new(num, den))
}

/// Formats a rational as `"p/q"`, or `"p"` when the denominator is one.
pub fn format_rational(value: &BigRational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Serde helper writing rationals as `"p/q"` strings.
pub fn serialize_rationals<S: serde::Serializer>(values: &[BigRational], serializer: S) -> Result<S::Ok, S::Error> {
    serializer.collect_seq(values.iter().map(format_rational))
}

/// Natural logarithm of a positive big integer, accurate for any size.
pub fn ln_bigint(value: &BigInt) -> f64 {
    debug_assert!(value.sign() == Sign::Plus);
    let bits = value.bits();
    if bits <= 1000 {
        if let Some(v) = value.to_f64() {
            if v.is_finite() {
                return v.ln();
            }
        }
    }
    let shift = bits - 64;
    let top = (value >> shift).to_f64().unwrap_or(f64::NAN);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural logarithm of a rational; `None` unless the value is strictly positive.
pub fn ln_rational(value: &BigRational) -> Option<f64> {
    if !value.is_positive() {
        return None;
    }
    Some(ln_bigint(value.numer()) - ln_bigint(value.denom()))
}

/// Nearest `f64`, with graceful handling of huge numerators and denominators.
pub fn to_f64(value: &BigRational) -> f64 {
    match value.to_f64() {
        Some(v) if v.is_finite() && (v != 0.0 || value.is_zero()) => v,
        _ => match ln_rational(&value.abs()) {
            Some(l) => {
                let m = l.exp();
                if value.is_negative() {
                    -m
                } else {
                    m
                }
            }
            None => 0.0,
        },
    }
}

/// `base^exp` for a small non-negative exponent.
pub fn pow(base: &BigRational, exp: usize) -> BigRational {
    num_traits::pow(base.clone(), exp)
}

/// Least common multiple of the denominators.
pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a BigRational>) -> BigInt {
    use num_integer::Integer;
    values
        .into_iter()
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}
