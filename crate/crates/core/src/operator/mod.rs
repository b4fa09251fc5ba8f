//! Exact arithmetic for differential operators (rational Weyl algebra) and
//! difference operators (shift algebra with inverse shifts), the Mellin maps
//! between them, and the action of both kinds of operator on data.
//!
//! Both operator types carry two symbol lists: the *variables* (which own a
//! derivation or a shift) and *parameters* (commuting symbols that may appear
//! in coefficients, such as `x` inside a difference operator in `i`).

mod diffop;
mod json;
mod mellin;
mod parse;
mod poly;
mod shiftop;

pub use diffop::{DiffMonomial, DiffOp};
pub use json::{DiffOpJson, DiffTermJson, ShiftOpJson, ShiftTermJson};
pub use mellin::{inverse_mellin, mellin};
pub use parse::OperatorAlgebra;
pub use poly::Poly;
pub use shiftop::{CompiledShiftOp, CompiledTerm, ShiftMonomial, ShiftOp};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn rat_frac(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"53/4"`, `"-2"` or `"0"`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let bad = || Error::usage(format!("invalid rational literal {s:?}"));
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: BigInt = num.parse().map_err(|_| bad())?;
    let den: BigInt = den.parse().map_err(|_| bad())?;
    if den.is_zero() {
        return Err(bad());
    }
    Ok(Rational::new(num, den))
}

pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub(crate) fn rational_to_f64(r: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

pub(crate) fn binomial(n: u32, k: u32) -> BigInt {
    let mut acc = BigInt::one();
    for t in 0..k {
        acc = acc * BigInt::from(n - t) / BigInt::from(t + 1);
    }
    acc
}

/// n (n-1) ... (n-k+1)
pub(crate) fn falling(n: u32, k: u32) -> BigInt {
    (0..k).fold(BigInt::one(), |acc, t| acc * BigInt::from(n - t))
}

pub(crate) fn check_same(kind: &str, a: &[String], b: &[String]) -> Result<()> {
    if a != b {
        return Err(Error::usage(format!("{kind} lists differ: {a:?} vs {b:?}")));
    }
    Ok(())
}

/// Writes `coef * factors` in the parser's syntax.
pub(crate) fn write_term(out: &mut String, coef: &Rational, factors: &[String], first: bool) {
    let neg = coef < &Rational::zero();
    let abs = if neg { -coef.clone() } else { coef.clone() };
    if first {
        if neg {
            out.push('-');
        }
    } else {
        out.push_str(if neg { " - " } else { " + " });
    }
    let mut parts = Vec::new();
    if !abs.is_one() || factors.is_empty() {
        parts.push(format_rational(&abs));
    }
    parts.extend(factors.iter().cloned());
    out.push_str(&parts.join("*"));
}

pub(crate) fn power_factor(name: &str, e: i64) -> Option<String> {
    match e {
        0 => None,
        1 => Some(name.to_string()),
        e => Some(format!("{name}^{e}")),
    }
}
