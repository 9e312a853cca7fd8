//! Exact arbitrary-precision rational arithmetic helpers.
//!
//! The solver stores every number as a [`Rational`] in lowest terms with a
//! positive denominator (both invariants maintained by `num-rational`).

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = num_rational::BigRational;

/// `n/d` as an exact rational. Panics if `d == 0`.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Number of bits in the binary representation of `|m|`, i.e. ⌈log2(|m|+1)⌉.
/// `bit_length(0) = 0`, `bit_length(1) = 1`, `bit_length(4) = 3`.
pub fn bit_length(m: &BigInt) -> u64 {
    m.magnitude().bits()
}

/// Combined bit size of a rational's numerator and denominator.
pub fn rational_bits(r: &Rational) -> u64 {
    bit_length(r.numer()) + bit_length(r.denom())
}

/// 2^h as a positive integer.
pub fn pow2(h: u64) -> BigInt {
    BigInt::one() << h
}

/// 2^-h as a rational.
pub fn pow2_neg(h: u64) -> Rational {
    Rational::new(BigInt::one(), pow2(h))
}

/// Largest non-negative multiple of 2^-h that is ≤ max(v, 0).
pub fn floor_to_grid(v: &Rational, h: u64) -> Rational {
    if v.is_negative() {
        return Rational::zero();
    }
    let scaled = v * Rational::from_integer(pow2(h));
    Rational::new(scaled.floor().to_integer(), pow2(h))
}

/// Smallest j ≥ 0 with 2^j ≥ r. Panics if r ≤ 0.
pub fn ceil_log2(r: &Rational) -> u64 {
    assert!(r.is_positive(), "ceil_log2 requires a positive argument");
    let mut j = 0u64;
    let mut pow = r.denom().clone();
    while pow < *r.numer() {
        pow <<= 1;
        j += 1;
    }
    j
}

/// Parses a coefficient literal: a decimal such as `0.75` or `2`, or an
/// exact fraction such as `3/4`. Decimals convert exactly (0.3 → 3/10).
pub fn parse_rational(s: &str) -> Result<Rational, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty number".to_string());
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num
            .trim()
            .parse()
            .map_err(|_| format!("invalid integer '{}'", num.trim()))?;
        let d: BigInt = den
            .trim()
            .parse()
            .map_err(|_| format!("invalid integer '{}'", den.trim()))?;
        if d.is_zero() {
            return Err("zero denominator".to_string());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("invalid decimal '{s}'"));
        }
        let int_part = if int_part.is_empty() { "0" } else { int_part };
        let whole: BigInt = int_part
            .parse()
            .map_err(|_| format!("invalid decimal '{s}'"))?;
        let frac: BigInt = frac_part
            .parse()
            .map_err(|_| format!("invalid decimal '{s}'"))?;
        let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
        let sign = if whole.is_negative() { -BigInt::one() } else { BigInt::one() };
        return Ok(Rational::new(whole * &scale + sign * frac, scale));
    }
    let n: BigInt = s.parse().map_err(|_| format!("invalid number '{s}'"))?;
    Ok(Rational::from_integer(n))
}

/// Formats `v` (assumed ≥ 0) as a plain fraction `a/b`, or `a` when b = 1.
pub fn fraction_string(v: &Rational) -> String {
    if v.denom().is_one() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

/// Decimal expansion of `v` ≥ 0 truncated to exactly `digits` fractional
/// digits.
pub fn decimal_string(v: &Rational, digits: usize) -> String {
    let whole = v.floor().to_integer();
    let frac = v - Rational::from_integer(whole.clone());
    let scale = BigInt::from(10u32).pow(digits as u32);
    let scaled = (frac * Rational::from_integer(scale)).floor().to_integer();
    let mut frac_digits = scaled.to_string();
    while frac_digits.len() < digits {
        frac_digits.insert(0, '0');
    }
    format!("{whole}.{frac_digits}")
}

/// ⌈j·log10(2)⌉: the number of decimal digits certified by a 2^-j bound.
pub fn certified_digits(j: u64) -> usize {
    (j as f64 * std::f64::consts::LOG10_2).ceil().to_usize().unwrap_or(1).max(1)
}
