//! Exact rational helpers shared by the measure, engine and ball modules.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

use crate::error::{HitError, Result};

pub type Rational = BigRational;

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// Parses `"3/10"`, `"0.3"`, `"-1.25e-2"` or `"7"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    if s.is_empty() {
        return Err(HitError::Parse("empty number".into()));
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n
            .trim()
            .parse()
            .map_err(|_| HitError::Parse(format!("bad numerator in {s:?}")))?;
        let d: BigInt = d
            .trim()
            .parse()
            .map_err(|_| HitError::Parse(format!("bad denominator in {s:?}")))?;
        if d.is_zero() {
            return Err(HitError::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => {
            let e: i32 = s[i + 1..]
                .parse()
                .map_err(|_| HitError::Parse(format!("bad exponent in {s:?}")))?;
            (&s[..i], e)
        }
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(HitError::Parse(format!("no digits in {s:?}")));
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(HitError::Parse(format!("not a number: {s:?}")));
    }
    let all: String = format!("{int_part}{frac_part}");
    let mut value = Rational::from_integer(all.parse::<BigInt>().unwrap_or_default());
    let scale = exp - frac_part.len() as i32;
    let ten = int(10);
    if scale >= 0 {
        value *= num::pow(ten, scale as usize);
    } else {
        value /= num::pow(ten, (-scale) as usize);
    }
    Ok(if neg { -value } else { value })
}

pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Natural logarithm of a positive rational, accurate even when the value
/// underflows `f64`.
pub fn ln(x: &Rational) -> f64 {
    if !x.is_positive() {
        return f64::NEG_INFINITY;
    }
    let n = x.numer();
    let d = x.denom();
    ln_bigint(n) - ln_bigint(d)
}

fn ln_bigint(v: &BigInt) -> f64 {
    let bits = v.bits();
    if bits < 1000 {
        return v.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top: BigInt = v >> shift;
    top.to_f64().unwrap_or(f64::NAN).ln() + shift as f64 * std::f64::consts::LN_2
}

/// Smallest integer `>= x`.
pub fn ceil(x: &Rational) -> BigInt {
    x.ceil().to_integer()
}

pub fn pow(x: &Rational, e: usize) -> Rational {
    num::pow(x.clone(), e)
}

pub fn is_probability(x: &Rational) -> bool {
    !x.is_negative() && *x <= Rational::one()
}

/// Renders a rational as `n/d` (or `n` when integral).
pub fn display(x: &Rational) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}
