//! Mellin transform `s -> S_i`, `D_s -> -i S_i^-1` and its section
//! `i -> -s D_s - 1`, `S_i -> s`. Both are ring homomorphisms; parameters
//! pass through unchanged.

use num_traits::One;

use super::{rat, DiffOp, Rational, ShiftOp};
use crate::error::{Error, Result};

/// Maps a differential operator in the transform variables to a difference
/// operator in `indices` (one index per variable, in order).
pub fn mellin(p: &DiffOp, indices: &[&str]) -> Result<ShiftOp> {
    if indices.len() != p.vars().len() {
        return Err(Error::usage(format!(
            "{} transform variables but {} index names",
            p.vars().len(),
            indices.len()
        )));
    }
    let params: Vec<&str> = p.params().iter().map(String::as_str).collect();
    let z = ShiftOp::zero(indices, &params);
    let nv = indices.len();

    // images of s_j and D_{s_j}
    let mut s_img = Vec::with_capacity(nv);
    let mut d_img = Vec::with_capacity(nv);
    for name in indices {
        s_img.push(z.shift(name, 1)?);
        d_img.push(z.symbol(name)?.checked_mul(&z.shift(name, -1)?)?.scale(&rat(-1)));
    }
    let param_img: Vec<ShiftOp> = params.iter().map(|n| z.symbol(n)).collect::<Result<_>>()?;

    let mut out = z.zero_like();
    for (m, c) in p.terms() {
        let mut term = z.constant_like(c.clone());
        for (pi, img) in param_img.iter().enumerate() {
            term = term.checked_mul(&img.pow(m.pows[nv + pi]))?;
        }
        for j in 0..nv {
            term = term.checked_mul(&s_img[j].pow(m.pows[j]))?;
            term = term.checked_mul(&d_img[j].pow(m.dords[j]))?;
        }
        out = out.checked_add(&term)?;
    }
    Ok(out)
}

/// Maps a difference operator without inverse shifts back to a differential
/// operator in `vars`.
pub fn inverse_mellin(e: &ShiftOp, vars: &[&str]) -> Result<DiffOp> {
    if e.has_inverse_shifts() {
        return Err(Error::Domain(
            "inverse Mellin transform is only defined for operators without inverse shifts".into(),
        ));
    }
    if vars.len() != e.indices().len() {
        return Err(Error::usage(format!(
            "{} indices but {} variable names",
            e.indices().len(),
            vars.len()
        )));
    }
    let params: Vec<&str> = e.params().iter().map(String::as_str).collect();
    let z = DiffOp::zero(vars, &params);
    let ni = vars.len();

    let mut i_img = Vec::with_capacity(ni);
    let mut s_img = Vec::with_capacity(ni);
    for name in vars {
        let s = z.symbol(name)?;
        // -s D_s - 1
        i_img.push(
            s.checked_mul(&z.derivation(name)?)?
                .scale(&rat(-1))
                .checked_sub(&z.constant_like(Rational::one()))?,
        );
        s_img.push(s);
    }
    let param_img: Vec<DiffOp> = params.iter().map(|n| z.symbol(n)).collect::<Result<_>>()?;

    let mut out = z.zero_like();
    for (m, c) in e.terms() {
        let mut term = z.constant_like(c.clone());
        for (pi, img) in param_img.iter().enumerate() {
            term = term.checked_mul(&img.pow(m.pows[ni + pi]))?;
        }
        for j in 0..ni {
            term = term.checked_mul(&i_img[j].pow(m.pows[j]))?;
        }
        for j in 0..ni {
            term = term.checked_mul(&s_img[j].pow(m.shifts[j] as u32))?;
        }
        out = out.checked_add(&term)?;
    }
    Ok(out)
}
