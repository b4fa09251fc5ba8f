use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use num_traits::Zero;

use super::{power_factor, write_term, Rational};

/// Sparse multivariate polynomial with exact rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Poly {
    vars: Vec<String>,
    terms: BTreeMap<Vec<u32>, Rational>,
}

impl Poly {
    pub fn zero(vars: &[&str]) -> Self {
        Poly {
            vars: vars.iter().map(|s| s.to_string()).collect(),
            terms: BTreeMap::new(),
        }
    }

    pub fn from_terms(vars: &[&str], terms: impl IntoIterator<Item = (Vec<u32>, Rational)>) -> Self {
        let mut p = Poly::zero(vars);
        for (e, c) in terms {
            assert_eq!(e.len(), p.vars.len(), "exponent vector length");
            p.add_term(e, c);
        }
        p
    }

    /// Univariate polynomial from ascending coefficients.
    pub fn univariate(var: &str, coeffs: &[Rational]) -> Self {
        Poly::from_terms(
            &[var],
            coeffs.iter().enumerate().map(|(d, c)| (vec![d as u32], c.clone())),
        )
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Rational)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, exps: Vec<u32>, coef: Rational) {
        if coef.is_zero() {
            return;
        }
        match self.terms.entry(exps) {
            Entry::Vacant(v) => {
                v.insert(coef);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += coef;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn coefficient(&self, exps: &[u32]) -> Rational {
        self.terms.get(exps).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum::<u32>()).max().unwrap_or(0)
    }

    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                super::rational_to_f64(c) * e.iter().zip(point).map(|(&k, &x)| x.powi(k as i32)).product::<f64>()
            })
            .sum()
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut out = String::new();
        for (n, (e, c)) in self.terms.iter().rev().enumerate() {
            let factors: Vec<String> = e
                .iter()
                .zip(&self.vars)
                .filter_map(|(&k, v)| power_factor(v, k as i64))
                .collect();
            write_term(&mut out, c, &factors, n == 0);
        }
        f.write_str(&out)
    }
}
