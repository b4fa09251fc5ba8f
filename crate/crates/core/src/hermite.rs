//! Physicists' Hermite polynomials and Gauss–Hermite quadrature for the
//! weight `exp(-x^2)`.

use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_traits::Zero;
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::operator::{Poly, Rational};

/// `H(n; x)` with exact integer coefficients, ascending powers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HermitePoly {
    coeffs: Vec<BigInt>,
}

impl HermitePoly {
    pub fn new(degree: usize) -> Self {
        // H(n+1) = 2x H(n) - 2n H(n-1)
        let mut prev: Vec<BigInt> = vec![BigInt::from(1)];
        if degree == 0 {
            return HermitePoly { coeffs: prev };
        }
        let mut cur: Vec<BigInt> = vec![BigInt::zero(), BigInt::from(2)];
        for n in 1..degree {
            let mut next = vec![BigInt::zero(); n + 2];
            for (k, c) in cur.iter().enumerate() {
                next[k + 1] += c * 2;
            }
            for (k, c) in prev.iter().enumerate() {
                next[k] -= c * BigInt::from(2 * n);
            }
            prev = std::mem::replace(&mut cur, next);
        }
        HermitePoly { coeffs: cur }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn to_poly(&self, var: &str) -> Poly {
        let c: Vec<Rational> = self.coeffs.iter().map(|c| Rational::from_integer(c.clone())).collect();
        Poly::univariate(var, &c)
    }

    /// `dH(n)/dx` as an exact polynomial.
    pub fn derivative_poly(&self, var: &str) -> Poly {
        let c: Vec<Rational> = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| Rational::from_integer(c * BigInt::from(k)))
            .collect();
        Poly::univariate(var, &c)
    }
}

/// Arithmetic needed by the Hermite recurrence; `f64` and [`TwoFloat`].
pub trait HermiteScalar: Copy + From<f64> + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> {}

impl<T: Copy + From<f64> + Add<Output = T> + Sub<Output = T> + Mul<Output = T>> HermiteScalar for T {}

/// `H(n; x)` by the forward three-term recurrence.
pub fn hermite_eval<T: HermiteScalar>(n: usize, x: T) -> T {
    let two_x = x * T::from(2.0);
    let (mut h0, mut h1) = (T::from(1.0), two_x);
    if n == 0 {
        return h0;
    }
    for m in 1..n {
        let h2 = two_x * h1 - T::from(2.0 * m as f64) * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// `dH(n; x)/dx = 2n H(n-1; x)`.
pub fn hermite_deriv_eval<T: HermiteScalar>(n: usize, x: T) -> T {
    if n == 0 {
        T::from(0.0)
    } else {
        T::from(2.0 * n as f64) * hermite_eval(n - 1, x)
    }
}

/// `H(0; x), ..., H(n_max; x)`.
pub fn hermite_values(n_max: usize, x: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if n_max == 0 {
        return;
    }
    out.push(2.0 * x);
    for m in 1..n_max {
        let next = 2.0 * x * out[m] - 2.0 * m as f64 * out[m - 1];
        out.push(next);
    }
}

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Ascending, exactly symmetric about zero.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `sum_m w_m f(x_m)` together with `sum_m w_m |f(x_m)|`. Mirror nodes are
    /// summed in pairs, so an integrand that is odd in floating point
    /// integrates to exactly zero.
    pub fn integrate_with_mass(&self, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
        let m = self.nodes.len();
        let (mut sum, mut mass) = (0.0, 0.0);
        for k in 0..m / 2 {
            let (x, w) = (self.nodes[m - 1 - k], self.weights[m - 1 - k]);
            let (fp, fm) = (f(x), f(-x));
            sum += w * (fp + fm);
            mass += w * (fp.abs() + fm.abs());
        }
        if m % 2 == 1 {
            let w = self.weights[m / 2];
            let f0 = f(0.0);
            sum += w * f0;
            mass += w * f0.abs();
        }
        (sum, mass)
    }

    pub fn integrate(&self, f: impl FnMut(f64) -> f64) -> f64 {
        self.integrate_with_mass(f).0
    }
}

/// Golub–Welsch: nodes are the eigenvalues of the Jacobi matrix of the
/// Hermite weight (zero diagonal, off-diagonal `sqrt(k/2)`), weights are
/// `sqrt(pi)` times the squared first eigenvector components.
pub fn gauss_hermite(order: usize) -> Result<QuadratureRule> {
    if order == 0 {
        return Err(Error::usage("quadrature order must be at least 1"));
    }
    let mut d = vec![0.0; order];
    let mut e: Vec<f64> = (1..=order).map(|k| (k as f64 / 2.0).sqrt()).collect();
    e[order - 1] = 0.0;
    let mut z = vec![0.0; order];
    z[0] = 1.0;
    tridiagonal_ql(&mut d, &mut e, &mut z)?;

    let mut pairs: Vec<(f64, f64)> = d
        .into_iter()
        .zip(z)
        .map(|(x, v)| (x, std::f64::consts::PI.sqrt() * v * v))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut nodes, mut weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();

    for k in 0..order / 2 {
        let j = order - 1 - k;
        let x = 0.5 * (nodes[j] - nodes[k]);
        let w = 0.5 * (weights[j] + weights[k]);
        nodes[k] = -x;
        nodes[j] = x;
        weights[k] = w;
        weights[j] = w;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix
/// (diagonal `d`, off-diagonal `e[0..n-1]`, `e[n-1] = 0`). Only the first row
/// `z` of the eigenvector matrix is accumulated.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], z: &mut [f64]) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 100 {
                return Err(Error::Domain("tridiagonal eigensolver did not converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// `a / b` in double-double. The division operator of [`TwoFloat`] only
/// carries about `f64` accuracy.
pub fn dd_div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::new_add(q1, q2) + q3
}

/// Gauss–Hermite rule in double-double arithmetic. Nodes are the `f64`
/// nodes refined by Newton steps on the orthonormal recurrence, weights come
/// from the Christoffel function `1 / sum_{n<M} p_n(x)^2`.
#[derive(Clone, Debug)]
pub struct ExtendedRule {
    nodes: Vec<TwoFloat>,
    weights: Vec<TwoFloat>,
}

impl ExtendedRule {
    pub fn new(order: usize) -> Result<Self> {
        let base = gauss_hermite(order)?;
        let a: Vec<TwoFloat> = (0..order)
            .map(|n| (TwoFloat::from(2.0) / (n + 1) as f64).sqrt())
            .collect();
        let b: Vec<TwoFloat> = (0..order)
            .map(|n| (TwoFloat::from(n as f64) / (n + 1) as f64).sqrt())
            .collect();
        let p0 = dd_div(TwoFloat::from(1.0), twofloat::consts::PI.sqrt().sqrt());
        // p_0 .. p_order at x, plus the sum of squares of p_0 .. p_{order-1}
        let eval = |x: TwoFloat| {
            let (mut prev, mut cur) = (TwoFloat::from(0.0), p0);
            let mut sq = TwoFloat::from(0.0);
            for n in 0..order {
                sq += cur * cur;
                let next = a[n] * x * cur - b[n] * prev;
                prev = cur;
                cur = next;
            }
            (cur, prev, sq)
        };
        let mut nodes = Vec::with_capacity(order);
        let mut weights = Vec::with_capacity(order);
        let deriv_scale = TwoFloat::from(2.0 * order as f64).sqrt();
        for (&x0, &w0) in base.nodes.iter().zip(&base.weights) {
            let mut x = TwoFloat::from(x0);
            let mut ok = true;
            for _ in 0..3 {
                let (pm, pm1, _) = eval(x);
                let step = dd_div(pm, deriv_scale * pm1);
                if !step.is_valid() {
                    ok = false;
                    break;
                }
                x -= step;
            }
            let (_, _, sq) = eval(x);
            let w = dd_div(TwoFloat::from(1.0), sq);
            if ok && w.is_valid() && (x.hi() - x0).abs() <= 1e-10 * x0.abs().max(1.0) {
                nodes.push(x);
                weights.push(w);
            } else {
                // deep in the tail, where the weight is negligible anyway
                nodes.push(TwoFloat::from(x0));
                weights.push(TwoFloat::from(w0));
            }
        }
        for k in 0..order / 2 {
            let j = order - 1 - k;
            let x = (nodes[j] - nodes[k]) * 0.5;
            let w = (weights[j] + weights[k]) * 0.5;
            nodes[k] = -x;
            nodes[j] = x;
            weights[k] = w;
            weights[j] = w;
        }
        if order % 2 == 1 {
            nodes[order / 2] = TwoFloat::from(0.0);
        }
        Ok(ExtendedRule { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[TwoFloat] {
        &self.nodes
    }

    pub fn weights(&self) -> &[TwoFloat] {
        &self.weights
    }

    /// Same pairing as [`QuadratureRule::integrate_with_mass`]; the mass is
    /// accumulated in `f64`.
    pub fn integrate_with_mass(&self, mut f: impl FnMut(TwoFloat) -> TwoFloat) -> (TwoFloat, f64) {
        let m = self.nodes.len();
        let (mut sum, mut mass) = (TwoFloat::from(0.0), 0.0);
        for k in 0..m / 2 {
            let (x, w) = (self.nodes[m - 1 - k], self.weights[m - 1 - k]);
            let (fp, fm) = (f(x), f(-x));
            sum += w * (fp + fm);
            mass += w.hi() * (fp.hi().abs() + fm.hi().abs());
        }
        if m % 2 == 1 {
            let w = self.weights[m / 2];
            let f0 = f(TwoFloat::from(0.0));
            sum += w * f0;
            mass += w.hi() * f0.hi().abs();
        }
        (sum, mass)
    }
}

const CACHED_LEVELS: usize = 12;

/// Shared double-double rules for orders `2^k`, `k < 12`.
pub fn cached_extended_rule(order: usize) -> Result<std::borrow::Cow<'static, ExtendedRule>> {
    static RULES: [OnceLock<ExtendedRule>; CACHED_LEVELS] = [const { OnceLock::new() }; CACHED_LEVELS];
    if order.is_power_of_two() {
        let level = order.trailing_zeros() as usize;
        if level < CACHED_LEVELS {
            if let Some(r) = RULES[level].get() {
                return Ok(std::borrow::Cow::Borrowed(r));
            }
            let rule = ExtendedRule::new(order)?;
            return Ok(std::borrow::Cow::Borrowed(RULES[level].get_or_init(|| rule)));
        }
    }
    ExtendedRule::new(order).map(std::borrow::Cow::Owned)
}

/// Shared rules for orders `2^k`, `k < 12`; other orders are built on demand.
pub fn cached_rule(order: usize) -> Result<std::borrow::Cow<'static, QuadratureRule>> {
    static RULES: [OnceLock<QuadratureRule>; CACHED_LEVELS] = [const { OnceLock::new() }; CACHED_LEVELS];
    if order.is_power_of_two() {
        let level = order.trailing_zeros() as usize;
        if level < CACHED_LEVELS {
            if let Some(r) = RULES[level].get() {
                return Ok(std::borrow::Cow::Borrowed(r));
            }
            let rule = gauss_hermite(order)?;
            return Ok(std::borrow::Cow::Borrowed(RULES[level].get_or_init(|| rule)));
        }
    }
    gauss_hermite(order).map(std::borrow::Cow::Owned)
}
