//! Value functions in the Hermite basis, the induced feedback law, the HJB
//! residual and closed-loop simulation.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::hermite_values;
use crate::problem::ProblemSpec;

/// `V(x) = sum_i v_i (H(i; x) - H(i; 0))` over degrees `1..=N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueFunction {
    pub v: Vec<f64>,
}

impl ValueFunction {
    pub fn new(v: Vec<f64>) -> Self {
        ValueFunction { v }
    }

    pub fn zero(n: usize) -> Self {
        ValueFunction { v: vec![0.0; n] }
    }

    pub fn n(&self) -> usize {
        self.v.len()
    }

    pub fn value(&self, x: f64) -> f64 {
        let mut hx = Vec::with_capacity(self.n() + 1);
        let mut h0 = Vec::with_capacity(self.n() + 1);
        hermite_values(self.n(), x, &mut hx);
        hermite_values(self.n(), 0.0, &mut h0);
        self.v
            .iter()
            .enumerate()
            .map(|(m, c)| c * (hx[m + 1] - h0[m + 1]))
            .sum()
    }

    /// `V'(x) = sum_i v_i 2i H(i-1; x)`.
    pub fn derivative(&self, x: f64) -> f64 {
        let mut h = Vec::with_capacity(self.n() + 1);
        hermite_values(self.n(), x, &mut h);
        self.v
            .iter()
            .enumerate()
            .map(|(m, c)| c * 2.0 * (m + 1) as f64 * h[m])
            .sum()
    }

    /// `u = -(1/2) R^{-1} g(x) V'(x)`.
    pub fn feedback(&self, x: f64, spec: &ProblemSpec) -> f64 {
        -0.5 / spec.r * spec.g.at(x) * self.derivative(x)
    }

    /// `V' f + q - (1/4) V' g R^{-1} g V'`.
    pub fn hjb_residual(&self, x: f64, spec: &ProblemSpec) -> f64 {
        let dv = self.derivative(x);
        let g = spec.g.at(x);
        dv * spec.f.at(x) + spec.q.at(x) - 0.25 * dv * g * g / spec.r * dv
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub inputs: Vec<f64>,
    pub dt: f64,
    pub method: String,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> Option<f64> {
        self.states.last().copied()
    }

    /// Trapezoidal `int (q(x) + R u^2) dt` along the recorded samples.
    pub fn running_cost(&self, spec: &ProblemSpec) -> f64 {
        let l: Vec<f64> = self
            .states
            .iter()
            .zip(&self.inputs)
            .map(|(&x, &u)| spec.q.at(x) + spec.r * u * u)
            .collect();
        l.windows(2).map(|w| 0.5 * (w[0] + w[1]) * self.dt).sum()
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "x", "u"])?;
        for ((t, x), u) in self.times.iter().zip(&self.states).zip(&self.inputs) {
            out.serialize((t, x, u))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Classical RK4 on `dx/dt = f(x) + g(x) u(x)` with `u` from `vf`.
pub fn simulate(vf: &ValueFunction, spec: &ProblemSpec, x0: f64, t_end: f64, dt: f64) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_end >= dt) {
        return Err(Error::usage(format!(
            "need dt > 0 and t_end >= dt, got dt = {dt}, t_end = {t_end}"
        )));
    }
    let rhs = |x: f64| spec.f.at(x) + spec.g.at(x) * vf.feedback(x, spec);
    let steps = (t_end / dt).round() as usize;
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        inputs: Vec::with_capacity(steps + 1),
        dt,
        method: "RK4".to_string(),
    };
    let mut x = x0;
    for n in 0..=steps {
        let t = n as f64 * dt;
        let u = vf.feedback(x, spec);
        if !x.is_finite() || !u.is_finite() {
            return Err(Error::Divergence {
                t,
                state: x,
                partial: Box::new(traj),
            });
        }
        traj.times.push(t);
        traj.states.push(x);
        traj.inputs.push(u);
        if n == steps {
            break;
        }
        let k1 = rhs(x);
        let k2 = rhs(x + 0.5 * dt * k1);
        let k3 = rhs(x + 0.5 * dt * k2);
        let k4 = rhs(x + dt * k3);
        x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    Ok(traj)
}

/// `points` evenly spaced samples of `[lo, hi]`, endpoints included.
pub fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|m| lo + (hi - lo) * m as f64 / (points - 1) as f64)
            .collect(),
    }
}

pub fn write_value_scan(vf: &ValueFunction, xs: &[f64], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "V"])?;
    for &x in xs {
        out.serialize((x, vf.value(x)))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_residual_scan(vf: &ValueFunction, spec: &ProblemSpec, xs: &[f64], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "hjb_residual"])?;
    for &x in xs {
        out.serialize((x, vf.hjb_residual(x, spec)))?;
    }
    out.flush()?;
    Ok(())
}

pub fn create_file(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}
