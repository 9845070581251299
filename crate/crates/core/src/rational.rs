//! Exact rational helpers.

use alloc::string::String;
use core::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

/// Exact rational number used for all volumes and costs.
pub type Rational = num_rational::BigRational;

/// Integer seconds.
pub type Time = i64;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn frac(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

pub fn time(t: Time) -> Rational {
    int(t)
}

pub fn min(a: Rational, b: Rational) -> Rational {
    if b < a {
        b
    } else {
        a
    }
}

pub fn max(a: Rational, b: Rational) -> Rational {
    if b > a {
        b
    } else {
        a
    }
}

/// Parses `"n"`, `"n/d"`, or a decimal such as `"-1.25"`.
pub fn parse(s: &str) -> Option<Rational> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).ok()?;
        let d = BigInt::from_str(d.trim()).ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    if let Some((whole, fractional)) = s.split_once('.') {
        if fractional.is_empty() || !fractional.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let negative = whole.starts_with('-');
        let whole_digits = whole.trim_start_matches(['-', '+']);
        if !whole_digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let mut digits = String::from(if whole_digits.is_empty() { "0" } else { whole_digits });
        digits.push_str(fractional);
        let mut n = BigInt::from_str(&digits).ok()?;
        if negative {
            n = -n;
        }
        let d = num_traits::pow(BigInt::from(10), fractional.len());
        return Some(Rational::new(n, d));
    }
    BigInt::from_str(s).ok().map(Rational::from_integer)
}

pub fn is_nonnegative(q: &Rational) -> bool {
    !q.is_negative()
}
