//! Galerkin system assembly and the successive approximation loop.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{IntegralTable, Kind, ProvenanceCounts};

/// `A[i,j,k] = a(i,j,k)`, `B[i,k] = b(i,k)`, `C[k] = c(k)`, zero-based here.
#[derive(Clone, Debug, PartialEq)]
pub struct GalerkinSystem {
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl GalerkinSystem {
    pub fn from_parts(n: usize, a: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if a.len() != n * n * n || b.len() != n * n || c.len() != n {
            return Err(Error::usage(format!("inconsistent Galerkin system sizes for N = {n}")));
        }
        Ok(GalerkinSystem { n, a, b, c })
    }

    pub fn assemble(a: &IntegralTable, b: &IntegralTable, c: &IntegralTable) -> Result<Self> {
        let kinds = [a.kind(), b.kind(), c.kind()];
        if kinds != [Kind::A, Kind::B, Kind::C] {
            return Err(Error::usage(format!("expected tables a, b, c, got {kinds:?}")));
        }
        let n = a.n();
        if b.n() != n || c.n() != n {
            return Err(Error::usage(format!("table sizes differ: {}, {}, {}", n, b.n(), c.n())));
        }
        for t in [a, b, c] {
            if !t.is_complete() {
                return Err(Error::usage(format!("table {} has unset entries", t.kind())));
            }
        }
        Self::from_parts(
            n,
            a.raw_values().to_vec(),
            b.raw_values().to_vec(),
            c.raw_values().to_vec(),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a(&self, i: usize, j: usize, k: usize) -> f64 {
        self.a[(i * self.n + j) * self.n + k]
    }

    pub fn b(&self, i: usize, k: usize) -> f64 {
        self.b[i * self.n + k]
    }

    pub fn c(&self, k: usize) -> f64 {
        self.c[k]
    }

    /// Relabels basis functions: new index `m` is old index `perm[m]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n;
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::usage("not a permutation"));
        }
        let mut a = vec![0.0; n * n * n];
        let mut b = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                b[i * n + j] = self.b(perm[i], perm[j]);
                for k in 0..n {
                    a[(i * n + j) * n + k] = self.a(perm[i], perm[j], perm[k]);
                }
            }
        }
        let c = perm.iter().map(|&p| self.c[p]).collect();
        Self::from_parts(n, a, b, c)
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::usage(format!("vector of length {} for N = {}", v.len(), self.n)));
        }
        Ok(())
    }

    /// `u^T A_k w`.
    fn a_form(&self, k: usize, u: &[f64], w: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            let mut row = 0.0;
            for j in 0..self.n {
                row += self.a(i, j, k) * w[j];
            }
            acc += u[i] * row;
        }
        acc
    }

    /// Component `k`: `v^T (b_k - A_k v_prev / 2) + c_k + v_prev^T A_k v_prev / 4`.
    pub fn le_residual(&self, v: &[f64], v_prev: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        self.check_len(v_prev)?;
        Ok((0..self.n)
            .map(|k| {
                let bv: f64 = (0..self.n).map(|i| v[i] * self.b(i, k)).sum();
                bv - 0.5 * self.a_form(k, v, v_prev) + self.c[k] + 0.25 * self.a_form(k, v_prev, v_prev)
            })
            .collect())
    }

    fn step_matrix(&self, v_prev: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        for k in 0..n {
            for i in 0..n {
                let av: f64 = (0..n).map(|j| self.a(i, j, k) * v_prev[j]).sum();
                m[(k, i)] = self.b(i, k) - 0.5 * av;
            }
            rhs[k] = -(self.c[k] + 0.25 * self.a_form(k, v_prev, v_prev));
        }
        (m, rhs)
    }

    /// Solves the linear Galerkin equations for the next iterate.
    pub fn sga_step(&self, v_prev: &[f64]) -> Result<Vec<f64>> {
        self.step_at(v_prev, 0, &[])
    }

    fn step_at(&self, v_prev: &[f64], iteration: usize, history: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v_prev)?;
        let (mut m, mut rhs) = self.step_matrix(v_prev);
        let n = self.n;
        // the Hermite basis is unnormalized, so entries span many decades
        let mut col_scale = vec![1.0; n];
        for r in 0..n {
            let s = m.row(r).iter().fold(0.0f64, |a, x| a.max(x.abs()));
            if s > 0.0 {
                m.row_mut(r).scale_mut(1.0 / s);
                rhs[r] /= s;
            }
        }
        for (c, scale) in col_scale.iter_mut().enumerate() {
            let s = m.column(c).iter().fold(0.0f64, |a, x| a.max(x.abs()));
            if s > 0.0 {
                m.column_mut(c).scale_mut(1.0 / s);
                *scale = s;
            }
        }
        let lu = m.lu();
        let pivot = lu.u().diagonal().iter().fold(f64::INFINITY, |p, d| p.min(d.abs()));
        let singular = || Error::Singular {
            iteration,
            pivot,
            residual_history: history.to_vec(),
        };
        if !(pivot >= 1e-12) {
            return Err(singular());
        }
        let v = lu.solve(&rhs).ok_or_else(singular)?;
        Ok(v.iter().zip(&col_scale).map(|(x, s)| x / s).collect())
    }

    pub fn sga_run(&self, cfg: &SgaConfig) -> Result<SgaResult> {
        cfg.validate()?;
        self.check_len(&cfg.v0)?;
        let max_norm = |r: Vec<f64>| r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut v = cfg.v0.clone();
        let initial = max_norm(self.le_residual(&v, &v)?);
        let mut residual = initial;
        let mut history = Vec::new();
        while residual > cfg.eps && history.len() < cfg.l_max {
            v = self.step_at(&v, history.len() + 1, &history)?;
            residual = max_norm(self.le_residual(&v, &v)?);
            history.push(residual);
        }
        Ok(SgaResult {
            iterations: history.len(),
            converged: residual <= cfg.eps,
            v_star: v,
            initial_residual: initial,
            residual_history: history,
            tables: Vec::new(),
        })
    }
}

/// The initial guess `v0 = e_2 (1 + sqrt 2) / 8`, the linearized Riccati solution.
pub fn riccati_initial_guess(n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    if n >= 2 {
        v[1] = (1.0 + 2f64.sqrt()) / 8.0;
    }
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgaConfig {
    pub v0: Vec<f64>,
    pub eps: f64,
    pub l_max: usize,
}

impl SgaConfig {
    pub fn new(v0: Vec<f64>, eps: f64, l_max: usize) -> Self {
        SgaConfig { v0, eps, l_max }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || self.l_max == 0 {
            return Err(Error::usage(format!(
                "need eps > 0 and l_max >= 1, got eps = {}, l_max = {}",
                self.eps, self.l_max
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableSummary {
    pub kind: Kind,
    #[serde(rename = "N")]
    pub n: usize,
    pub provenance: ProvenanceCounts,
}

impl TableSummary {
    pub fn of(t: &IntegralTable) -> Self {
        TableSummary {
            kind: t.kind(),
            n: t.n(),
            provenance: t.counts(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgaResult {
    pub v_star: Vec<f64>,
    pub iterations: usize,
    /// Max-norm of `LE(v, v)` after each iteration.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub initial_residual: f64,
    #[serde(default)]
    pub tables: Vec<TableSummary>,
}
