//! Browser bindings for `sga-core`.
//!
//! Each export returns a JSON string. The `*_json` functions hold the logic
//! and run natively as well; the exported wrappers only convert errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use serde::Serialize;
use wasm_bindgen::prelude::*;

use sga_core::cli::{build_tables, solve as run_sga, RunConfig};
use sga_core::control::{grid, simulate as run_simulation, Trajectory, ValueFunction};
use sga_core::problem::ProblemSpec;
use sga_core::table::ProvenanceCounts;
use sga_core::Error;

pub const MAX_N: usize = 20;
pub const MAX_POINTS: usize = 5000;

#[derive(Debug, Serialize)]
pub struct TableInfo {
    pub kind: String,
    pub provenance: ProvenanceCounts,
    pub fill_ms: f64,
}

#[derive(Debug, Serialize)]
pub struct Solution {
    pub problem: String,
    pub n: usize,
    pub v_star: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub residual_history: Vec<f64>,
    pub tables: Vec<TableInfo>,
}

#[derive(Debug, Serialize)]
pub struct Curve {
    pub x: Vec<f64>,
    pub value: Vec<f64>,
    pub residual: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Run {
    pub diverged: bool,
    pub message: Option<String>,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

fn spec(problem: &str) -> Result<ProblemSpec, String> {
    ProblemSpec::by_label(problem).map_err(|e| e.to_string())
}

fn check_coefficients(v: &[f64]) -> Result<(), String> {
    if v.is_empty() || v.len() > MAX_N || v.iter().any(|c| !c.is_finite()) {
        return Err(format!("need 1 to {MAX_N} finite coefficients"));
    }
    Ok(())
}

pub fn solve_json(problem: &str, n: usize, eps: f64, l_max: usize) -> Result<String, String> {
    if !(1..=MAX_N).contains(&n) {
        return Err(format!("N must be between 1 and {MAX_N}"));
    }
    let cfg = RunConfig {
        problem: problem.to_string(),
        n,
        eps,
        l_max,
        ..RunConfig::default()
    };
    cfg.validate().map_err(|e| e.to_string())?;
    let built = build_tables(&cfg).map_err(|e| e.to_string())?;
    let result = run_sga(&built.tables, eps, l_max).map_err(|e| e.to_string())?;
    let tables = built
        .summaries
        .iter()
        .map(|s| TableInfo {
            kind: s.kind.to_string(),
            provenance: s.provenance,
            fill_ms: 1e3 * (s.seed_seconds + s.fill_seconds + s.fallback_seconds),
        })
        .collect();
    let out = Solution {
        problem: problem.to_string(),
        n,
        v_star: result.v_star,
        iterations: result.iterations,
        converged: result.converged,
        residual_history: result.residual_history,
        tables,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

pub fn value_curve_json(problem: &str, v: &[f64], x_min: f64, x_max: f64, points: usize) -> Result<String, String> {
    let spec = spec(problem)?;
    check_coefficients(v)?;
    if !(2..=MAX_POINTS).contains(&points) || !(x_min < x_max) {
        return Err(format!("need x_min < x_max and 2 to {MAX_POINTS} points"));
    }
    let vf = ValueFunction::new(v.to_vec());
    let x = grid(x_min, x_max, points);
    let out = Curve {
        value: x.iter().map(|&x| vf.value(x)).collect(),
        residual: x.iter().map(|&x| vf.hjb_residual(x, &spec)).collect(),
        x,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

fn run_of(t: Trajectory, diverged: bool, message: Option<String>) -> Run {
    Run {
        diverged,
        message,
        t: t.times,
        x: t.states,
        u: t.inputs,
    }
}

pub fn simulate_json(problem: &str, v: &[f64], x0: f64, t_end: f64, dt: f64) -> Result<String, String> {
    let spec = spec(problem)?;
    check_coefficients(v)?;
    if !(t_end / dt <= 1e6) {
        return Err("too many steps, raise dt or lower t_end".into());
    }
    let vf = ValueFunction::new(v.to_vec());
    let run = match run_simulation(&vf, &spec, x0, t_end, dt) {
        Ok(t) => run_of(t, false, None),
        Err(Error::Divergence { partial, t, .. }) => {
            let message = format!("state diverged at t = {t}");
            run_of(*partial, true, Some(message))
        }
        Err(e) => return Err(e.to_string()),
    };
    serde_json::to_string(&run).map_err(|e| e.to_string())
}

/// Builds the tables and runs SGA; returns the coefficients and fill statistics.
#[wasm_bindgen]
pub fn solve(problem: &str, n: usize, eps: f64, l_max: usize) -> Result<String, JsError> {
    solve_json(problem, n, eps, l_max).map_err(|e| JsError::new(&e))
}

/// `V` and the HJB residual on a uniform grid.
#[wasm_bindgen]
pub fn value_curve(problem: &str, v: &[f64], x_min: f64, x_max: f64, points: usize) -> Result<String, JsError> {
    value_curve_json(problem, v, x_min, x_max, points).map_err(|e| JsError::new(&e))
}

/// Closed-loop RK4 trajectory; a diverging run returns its prefix.
#[wasm_bindgen]
pub fn simulate(problem: &str, v: &[f64], x0: f64, t_end: f64, dt: f64) -> Result<String, JsError> {
    simulate_json(problem, v, x0, t_end, dt).map_err(|e| JsError::new(&e))
}
