use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::poly::Poly;
use super::{binomial, check_same, falling, power_factor, rat, write_term, Rational};
use crate::error::{Error, Result};

/// `x^pows * D^dords`, with the polynomial part to the left. `pows` covers the
/// variables first, then the parameters; `dords` covers the variables only.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DiffMonomial {
    pub pows: Vec<u32>,
    pub dords: Vec<u32>,
}

impl DiffMonomial {
    pub fn total_degree(&self) -> u32 {
        self.pows.iter().sum::<u32>() + self.dords.iter().sum::<u32>()
    }
}

// graded lexicographic, polynomial exponents before derivation orders
impl Ord for DiffMonomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.pows.cmp(&other.pows))
            .then_with(|| self.dords.cmp(&other.dords))
    }
}

impl PartialOrd for DiffMonomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Element of the rational Weyl algebra `Q[vars, params]<D_vars>` in normal form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffOp {
    vars: Vec<String>,
    params: Vec<String>,
    terms: BTreeMap<DiffMonomial, Rational>,
}

impl DiffOp {
    pub fn zero(vars: &[&str], params: &[&str]) -> Self {
        DiffOp {
            vars: vars.iter().map(|s| s.to_string()).collect(),
            params: params.iter().map(|s| s.to_string()).collect(),
            terms: BTreeMap::new(),
        }
    }

    pub(crate) fn zero_owned(vars: Vec<String>, params: Vec<String>) -> Self {
        DiffOp {
            vars,
            params,
            terms: BTreeMap::new(),
        }
    }

    pub fn zero_like(&self) -> Self {
        DiffOp::zero_owned(self.vars.clone(), self.params.clone())
    }

    pub fn constant_like(&self, c: Rational) -> Self {
        let mut out = self.zero_like();
        let mono = out.unit_monomial();
        out.add_term(mono, c);
        out
    }

    pub fn one(vars: &[&str], params: &[&str]) -> Self {
        DiffOp::zero(vars, params).constant_like(Rational::one())
    }

    /// Multiplication operator by a variable or parameter.
    pub fn symbol(&self, name: &str) -> Result<Self> {
        let pos = self
            .vars
            .iter()
            .chain(&self.params)
            .position(|v| v == name)
            .ok_or_else(|| Error::usage(format!("unknown symbol {name:?}")))?;
        let mut mono = self.unit_monomial();
        mono.pows[pos] = 1;
        let mut out = self.zero_like();
        out.add_term(mono, Rational::one());
        Ok(out)
    }

    /// The derivation `D_name`.
    pub fn derivation(&self, name: &str) -> Result<Self> {
        let pos = self
            .vars
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::usage(format!("no derivation for {name:?}")))?;
        let mut mono = self.unit_monomial();
        mono.dords[pos] = 1;
        let mut out = self.zero_like();
        out.add_term(mono, Rational::one());
        Ok(out)
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&DiffMonomial, &Rational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub(crate) fn unit_monomial(&self) -> DiffMonomial {
        DiffMonomial {
            pows: vec![0; self.vars.len() + self.params.len()],
            dords: vec![0; self.vars.len()],
        }
    }

    pub fn add_term(&mut self, mono: DiffMonomial, coef: Rational) {
        assert_eq!(mono.pows.len(), self.vars.len() + self.params.len());
        assert_eq!(mono.dords.len(), self.vars.len());
        if coef.is_zero() {
            return;
        }
        match self.terms.entry(mono) {
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

    fn check_compatible(&self, other: &Self) -> Result<()> {
        check_same("variable", &self.vars, &other.vars)?;
        check_same("parameter", &self.params, &other.params)
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.checked_add(&other.scale(&-Rational::one()))
    }

    pub fn scale(&self, c: &Rational) -> Self {
        let mut out = self.zero_like();
        for (m, v) in &self.terms {
            out.add_term(m.clone(), v * c);
        }
        out
    }

    /// Product in normal form, moving every `D_v` right past `v^c` with
    /// `D^b v^c = sum_m C(b,m) c!/(c-m)! v^(c-m) D^(b-m)`.
    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let nv = self.vars.len();
        let mut out = self.zero_like();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                // per-variable expansions (m, weight)
                let per_var: Vec<Vec<(u32, BigInt)>> = (0..nv)
                    .map(|v| {
                        let (b, c) = (ma.dords[v], mb.pows[v]);
                        (0..=b.min(c)).map(|m| (m, binomial(b, m) * falling(c, m))).collect()
                    })
                    .collect();
                let base = ca * cb;
                let mut choice = vec![0usize; nv];
                'odometer: loop {
                    let mut mono = DiffMonomial {
                        pows: ma.pows.iter().zip(&mb.pows).map(|(a, b)| a + b).collect(),
                        dords: ma.dords.iter().zip(&mb.dords).map(|(a, b)| a + b).collect(),
                    };
                    let mut weight = BigInt::one();
                    for v in 0..nv {
                        let (m, w) = &per_var[v][choice[v]];
                        mono.pows[v] -= m;
                        mono.dords[v] -= m;
                        weight *= w;
                    }
                    out.add_term(mono, &base * Rational::from_integer(weight));
                    for v in 0..nv {
                        choice[v] += 1;
                        if choice[v] < per_var[v].len() {
                            continue 'odometer;
                        }
                        choice[v] = 0;
                    }
                    break;
                }
            }
        }
        Ok(out)
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = self.constant_like(Rational::one());
        for _ in 0..e {
            acc = acc.checked_mul(self).expect("same space");
        }
        acc
    }

    /// Exact action on a polynomial in the operator's variables. Every
    /// parameter of the operator must be bound to an integer.
    pub fn apply(&self, q: &Poly, bindings: &[(&str, i64)]) -> Result<Poly> {
        check_same("variable", &self.vars, q.vars())?;
        let values = self.bind_params(bindings)?;
        let names: Vec<&str> = self.vars.iter().map(String::as_str).collect();
        let nv = self.vars.len();
        let mut out = Poly::zero(&names);
        for (m, c) in &self.terms {
            let mut coef = c.clone();
            for (p, v) in m.pows[nv..].iter().zip(&values) {
                coef *= num_traits::pow(v.clone(), *p as usize);
            }
            if coef.is_zero() {
                continue;
            }
            for (qe, qc) in q.terms() {
                if (0..nv).any(|v| m.dords[v] > qe[v]) {
                    continue;
                }
                let mut weight = BigInt::one();
                let mut exps = Vec::with_capacity(nv);
                for v in 0..nv {
                    weight *= falling(qe[v], m.dords[v]);
                    exps.push(qe[v] - m.dords[v] + m.pows[v]);
                }
                out.add_term(exps, &coef * qc * Rational::from_integer(weight));
            }
        }
        Ok(out)
    }

    fn bind_params(&self, bindings: &[(&str, i64)]) -> Result<Vec<Rational>> {
        self.params
            .iter()
            .map(|p| {
                bindings
                    .iter()
                    .find(|(n, _)| n == p)
                    .map(|(_, v)| rat(*v))
                    .ok_or_else(|| Error::usage(format!("symbol {p:?} is not bound")))
            })
            .collect()
    }
}

impl fmt::Display for DiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let names: Vec<&String> = self.vars.iter().chain(&self.params).collect();
        let mut out = String::new();
        for (n, (m, c)) in self.terms.iter().rev().enumerate() {
            let mut factors: Vec<String> = m
                .pows
                .iter()
                .zip(&names)
                .filter_map(|(&k, v)| power_factor(v, k as i64))
                .collect();
            factors.extend(
                m.dords
                    .iter()
                    .zip(&self.vars)
                    .filter_map(|(&k, v)| power_factor(&format!("D_{v}"), k as i64)),
            );
            write_term(&mut out, c, &factors, n == 0);
        }
        f.write_str(&out)
    }
}
