//! Galerkin integrals by Gauss–Hermite quadrature with order doubling.
//!
//! With weight `exp(-x^2)` and Hermite degrees as indices:
//!
//! * `a(i,j,k) = <H_i' (g^2/R) H_j', H_k>`
//! * `b(i,k)   = <H_i' f, H_k>`
//! * `c(k)     = <q, H_k>`

use std::time::Duration;

use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;
use web_time::Instant;

use crate::error::{Error, Result};
use crate::hermite::{
    cached_extended_rule, cached_rule, hermite_deriv_eval, hermite_eval, ExtendedRule, QuadratureRule,
};
use crate::problem::ProblemSpec;
use crate::table::{IntegralTable, Kind, Provenance};

/// Working precision of the quadrature sums.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Precision {
    Double,
    /// Nodes, weights and integrand in double-double, result rounded to `f64`.
    #[default]
    DoubleDouble,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraturePolicy {
    pub start_order: usize,
    pub max_order: usize,
    /// Two successive estimates agree when they differ by at most `tol`
    /// relative to the value, or `tol` relative to `max(1, sum w|f|)`.
    pub tol: f64,
    pub precision: Precision,
}

impl Default for QuadraturePolicy {
    fn default() -> Self {
        QuadraturePolicy {
            start_order: 16,
            max_order: 2048,
            tol: 1e-12,
            precision: Precision::DoubleDouble,
        }
    }
}

impl QuadraturePolicy {
    pub fn double() -> Self {
        QuadraturePolicy {
            precision: Precision::Double,
            ..Self::default()
        }
    }
}

fn check_index(kind: Kind, idx: &[i64]) -> Result<()> {
    if idx.len() != kind.dims() || idx.iter().any(|&v| v < 1) {
        return Err(Error::usage(format!(
            "{kind}: expected {} indices >= 1, got {idx:?}",
            kind.dims()
        )));
    }
    Ok(())
}

/// Quadrature sum and absolute mass of one integral at a fixed rule.
pub fn integral_with_rule(kind: Kind, idx: &[i64], spec: &ProblemSpec, rule: &QuadratureRule) -> Result<(f64, f64)> {
    check_index(kind, idx)?;
    let u: Vec<usize> = idx.iter().map(|&v| v as usize).collect();
    let out = match kind {
        Kind::A => {
            let (i, j, k) = (u[0], u[1], u[2]);
            rule.integrate_with_mass(|x| {
                let g = spec.g.at(x);
                g * g / spec.r * hermite_deriv_eval(i, x) * hermite_deriv_eval(j, x) * hermite_eval(k, x)
            })
        }
        Kind::B => {
            let (i, k) = (u[0], u[1]);
            rule.integrate_with_mass(|x| hermite_deriv_eval(i, x) * spec.f.at(x) * hermite_eval(k, x))
        }
        Kind::C => rule.integrate_with_mass(|x| spec.q.at(x) * hermite_eval(u[0], x)),
    };
    Ok(out)
}

/// [`integral_with_rule`] in double-double arithmetic.
pub fn integral_with_extended_rule(
    kind: Kind,
    idx: &[i64],
    spec: &ProblemSpec,
    rule: &ExtendedRule,
) -> Result<(f64, f64)> {
    check_index(kind, idx)?;
    let u: Vec<usize> = idx.iter().map(|&v| v as usize).collect();
    let (sum, mass) = match kind {
        Kind::A => {
            let (i, j, k) = (u[0], u[1], u[2]);
            rule.integrate_with_mass(|x: TwoFloat| {
                let g = spec.g.at_extended(x);
                g * g / spec.r * hermite_deriv_eval(i, x) * hermite_deriv_eval(j, x) * hermite_eval(k, x)
            })
        }
        Kind::B => {
            let (i, k) = (u[0], u[1]);
            rule.integrate_with_mass(|x| hermite_deriv_eval(i, x) * spec.f.at_extended(x) * hermite_eval(k, x))
        }
        Kind::C => rule.integrate_with_mass(|x| spec.q.at_extended(x) * hermite_eval(u[0], x)),
    };
    Ok((sum.hi() + sum.lo(), mass))
}

fn integral_at_order(
    kind: Kind,
    idx: &[i64],
    spec: &ProblemSpec,
    order: usize,
    precision: Precision,
) -> Result<(f64, f64)> {
    match precision {
        Precision::Double => integral_with_rule(kind, idx, spec, &*cached_rule(order)?),
        Precision::DoubleDouble => integral_with_extended_rule(kind, idx, spec, &*cached_extended_rule(order)?),
    }
}

/// One Galerkin integral, doubling the rule order until two successive
/// estimates agree.
pub fn seed_integral(kind: Kind, idx: &[i64], spec: &ProblemSpec, policy: &QuadraturePolicy) -> Result<f64> {
    check_index(kind, idx)?;
    if policy.start_order == 0 || policy.start_order > policy.max_order {
        return Err(Error::usage("invalid quadrature order policy"));
    }
    let mut order = policy.start_order;
    let eval = |order| integral_at_order(kind, idx, spec, order, policy.precision);
    let (mut prev, _) = eval(order)?;
    loop {
        if order * 2 > policy.max_order {
            let (last, _) = eval(policy.max_order)?;
            return Err(Error::Quadrature {
                order: policy.max_order,
                previous: prev,
                last,
            });
        }
        order *= 2;
        let (next, mass) = eval(order)?;
        let diff = (next - prev).abs();
        if diff <= policy.tol * next.abs() || diff <= policy.tol * mass.max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
}

#[derive(Clone, Debug)]
pub struct TimedTable {
    pub table: IntegralTable,
    pub elapsed: Duration,
}

/// Every entry of the table by [`seed_integral`], sequentially.
pub fn full_table_quadrature(
    kind: Kind,
    n: usize,
    spec: &ProblemSpec,
    policy: &QuadraturePolicy,
) -> Result<TimedTable> {
    if n == 0 {
        return Err(Error::usage("N must be at least 1"));
    }
    let start = Instant::now();
    let mut table = IntegralTable::new(kind, n);
    for pos in 0..table.len() {
        let idx = table.index_of(pos);
        let v = seed_integral(kind, &idx, spec, policy)?;
        table.set_at(pos, v, Provenance::Quadrature);
    }
    Ok(TimedTable {
        table,
        elapsed: start.elapsed(),
    })
}
