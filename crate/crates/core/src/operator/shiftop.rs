use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{binomial, check_same, power_factor, rat, write_term, Rational};
use crate::error::{Error, Result};

/// `i^pows * S^shifts`, coefficients left of the shifts. `pows` covers the
/// indices first, then the parameters; `shifts` covers the indices only.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ShiftMonomial {
    pub pows: Vec<u32>,
    pub shifts: Vec<i32>,
}

impl ShiftMonomial {
    pub fn total_degree(&self) -> u32 {
        self.pows.iter().sum::<u32>() + self.shifts.iter().map(|s| s.unsigned_abs()).sum::<u32>()
    }
}

impl Ord for ShiftMonomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.pows.cmp(&other.pows))
            .then_with(|| self.shifts.cmp(&other.shifts))
    }
}

impl PartialOrd for ShiftMonomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn shift_order(a: &[i32], b: &[i32]) -> Ordering {
    let deg = |s: &[i32]| s.iter().map(|v| v.unsigned_abs()).sum::<u32>();
    deg(a).cmp(&deg(b)).then_with(|| a.cmp(b))
}

/// Element of `Q[indices, params]<S, S^-1>` in normal form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShiftOp {
    indices: Vec<String>,
    params: Vec<String>,
    terms: BTreeMap<ShiftMonomial, Rational>,
}

impl ShiftOp {
    pub fn zero(indices: &[&str], params: &[&str]) -> Self {
        ShiftOp {
            indices: indices.iter().map(|s| s.to_string()).collect(),
            params: params.iter().map(|s| s.to_string()).collect(),
            terms: BTreeMap::new(),
        }
    }

    pub(crate) fn zero_owned(indices: Vec<String>, params: Vec<String>) -> Self {
        ShiftOp {
            indices,
            params,
            terms: BTreeMap::new(),
        }
    }

    pub fn zero_like(&self) -> Self {
        ShiftOp::zero_owned(self.indices.clone(), self.params.clone())
    }

    pub fn constant_like(&self, c: Rational) -> Self {
        let mut out = self.zero_like();
        let mono = out.unit_monomial();
        out.add_term(mono, c);
        out
    }

    pub fn one(indices: &[&str], params: &[&str]) -> Self {
        ShiftOp::zero(indices, params).constant_like(Rational::one())
    }

    pub fn symbol(&self, name: &str) -> Result<Self> {
        let pos = self
            .indices
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

    /// `S_name^power`; negative powers give inverse shifts.
    pub fn shift(&self, name: &str, power: i32) -> Result<Self> {
        let pos = self
            .indices
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::usage(format!("no shift for {name:?}")))?;
        let mut mono = self.unit_monomial();
        mono.shifts[pos] = power;
        let mut out = self.zero_like();
        out.add_term(mono, Rational::one());
        Ok(out)
    }

    pub fn indices(&self) -> &[String] {
        &self.indices
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&ShiftMonomial, &Rational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn has_inverse_shifts(&self) -> bool {
        self.terms.keys().any(|m| m.shifts.iter().any(|&s| s < 0))
    }

    pub(crate) fn unit_monomial(&self) -> ShiftMonomial {
        ShiftMonomial {
            pows: vec![0; self.indices.len() + self.params.len()],
            shifts: vec![0; self.indices.len()],
        }
    }

    pub fn add_term(&mut self, mono: ShiftMonomial, coef: Rational) {
        assert_eq!(mono.pows.len(), self.indices.len() + self.params.len());
        assert_eq!(mono.shifts.len(), self.indices.len());
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
        check_same("index", &self.indices, &other.indices)?;
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

    /// Product in normal form via `S^g q(i) = q(i + g) S^g`.
    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let ni = self.indices.len();
        let mut out = self.zero_like();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                // (i + g)^c = sum_m C(c,m) g^(c-m) i^m for each index
                let per_index: Vec<Vec<(u32, BigInt)>> = (0..ni)
                    .map(|v| {
                        let (g, c) = (BigInt::from(ma.shifts[v]), mb.pows[v]);
                        (0..=c)
                            .map(|m| (m, binomial(c, m) * num_traits::pow(g.clone(), (c - m) as usize)))
                            .filter(|(_, w)| !w.is_zero())
                            .collect()
                    })
                    .collect();
                let base = ca * cb;
                let mut choice = vec![0usize; ni];
                'odometer: loop {
                    let mut mono = ShiftMonomial {
                        pows: ma.pows.iter().zip(&mb.pows).map(|(a, b)| a + b).collect(),
                        shifts: ma.shifts.iter().zip(&mb.shifts).map(|(a, b)| a + b).collect(),
                    };
                    let mut weight = BigInt::one();
                    for v in 0..ni {
                        let (m, w) = &per_index[v][choice[v]];
                        mono.pows[v] = mono.pows[v] - mb.pows[v] + m;
                        weight *= w;
                    }
                    out.add_term(mono, &base * Rational::from_integer(weight));
                    for v in 0..ni {
                        choice[v] += 1;
                        if choice[v] < per_index[v].len() {
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

    /// Distinct shift vectors present, in canonical order.
    pub fn shift_support(&self) -> Vec<Vec<i32>> {
        let mut out: Vec<Vec<i32>> = self.terms.keys().map(|m| m.shifts.clone()).collect();
        out.sort_by(|a, b| shift_order(a, b));
        out.dedup();
        out
    }

    /// Exact coefficient polynomial of `S^shift`, evaluated at integer `base`.
    /// Parameters are not allowed here; bind them away first.
    pub fn coefficient_at(&self, shift: &[i32], base: &[i64]) -> Result<Rational> {
        self.require_no_params()?;
        if base.len() != self.indices.len() {
            return Err(Error::usage("base index has the wrong dimension"));
        }
        let mut acc = Rational::zero();
        for (m, c) in self.terms.iter().filter(|(m, _)| m.shifts == shift) {
            let mut v = c.clone();
            for (&p, &b) in m.pows.iter().zip(base) {
                v *= num_traits::pow(rat(b), p as usize);
            }
            acc += v;
        }
        Ok(acc)
    }

    /// `(E . F)(base)` for a sequence `F` given as a closure.
    pub fn apply_at(&self, base: &[i64], seq: impl Fn(&[i64]) -> Rational) -> Result<Rational> {
        let mut acc = Rational::zero();
        for shift in self.shift_support() {
            let c = self.coefficient_at(&shift, base)?;
            let at: Vec<i64> = base.iter().zip(&shift).map(|(b, s)| b + *s as i64).collect();
            acc += c * seq(&at);
        }
        Ok(acc)
    }

    /// Substitutes integer values for parameters (e.g. to drop a symbol that
    /// does not occur).
    pub fn bind_params(&self, bindings: &[(&str, i64)]) -> Result<ShiftOp> {
        let ni = self.indices.len();
        let mut out = ShiftOp::zero_owned(self.indices.clone(), Vec::new());
        let values: Vec<Rational> = self
            .params
            .iter()
            .map(|p| {
                bindings
                    .iter()
                    .find(|(n, _)| n == p)
                    .map(|(_, v)| rat(*v))
                    .ok_or_else(|| Error::usage(format!("symbol {p:?} is not bound")))
            })
            .collect::<Result<_>>()?;
        for (m, c) in &self.terms {
            let mut coef = c.clone();
            for (p, v) in m.pows[ni..].iter().zip(&values) {
                coef *= num_traits::pow(v.clone(), *p as usize);
            }
            out.add_term(
                ShiftMonomial {
                    pows: m.pows[..ni].to_vec(),
                    shifts: m.shifts.clone(),
                },
                coef,
            );
        }
        Ok(out)
    }

    fn require_no_params(&self) -> Result<()> {
        if self.params.is_empty() {
            Ok(())
        } else {
            Err(Error::usage(format!(
                "operator still carries parameters {:?}",
                self.params
            )))
        }
    }

    /// Integer form for repeated evaluation: the operator is multiplied by the
    /// lcm of its denominators, divided by the gcd of the result, and signed so
    /// that the first coefficient is positive. Any nonzero rational multiple of
    /// an operator compiles to the same thing.
    pub fn compile(&self) -> Result<CompiledShiftOp> {
        self.require_no_params()?;
        let lcm = self.terms.values().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let mut gcd = BigInt::zero();
        for c in self.terms.values() {
            gcd = gcd.gcd(&(c * Rational::from_integer(lcm.clone())).to_integer());
        }
        if gcd.is_zero() {
            gcd = BigInt::one();
        }
        let mut terms = Vec::new();
        for shift in self.shift_support() {
            let monos: Vec<(Vec<u32>, BigInt)> = self
                .terms
                .iter()
                .filter(|(m, _)| m.shifts == shift)
                .map(|(m, c)| {
                    let n = (c * Rational::from_integer(lcm.clone())).to_integer() / &gcd;
                    (m.pows.clone(), n)
                })
                .collect();
            terms.push(CompiledTerm::new(shift, monos));
        }
        let flip = terms
            .first()
            .and_then(|t| t.big.last())
            .map(|(_, c)| c.is_negative())
            .unwrap_or(false);
        if flip {
            for t in &mut terms {
                *t = CompiledTerm::new(t.shift.clone(), t.big.iter().map(|(p, c)| (p.clone(), -c)).collect());
            }
        }
        Ok(CompiledShiftOp { terms })
    }
}

impl fmt::Display for ShiftOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let names: Vec<&String> = self.indices.iter().chain(&self.params).collect();
        let mut out = String::new();
        for (n, (m, c)) in self.terms.iter().rev().enumerate() {
            let mut factors: Vec<String> = m
                .pows
                .iter()
                .zip(&names)
                .filter_map(|(&k, v)| power_factor(v, k as i64))
                .collect();
            factors.extend(
                m.shifts
                    .iter()
                    .zip(&self.indices)
                    .filter_map(|(&k, v)| power_factor(&format!("S_{v}"), k as i64)),
            );
            write_term(&mut out, c, &factors, n == 0);
        }
        f.write_str(&out)
    }
}

/// One shift of a compiled operator with its integer coefficient polynomial.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompiledTerm {
    pub shift: Vec<i32>,
    small: Option<SmallPoly>,
    big: Vec<(Vec<u32>, BigInt)>,
}

/// Coefficients that fit in `i128`, exponents flattened row by row.
#[derive(Clone, Debug, PartialEq)]
struct SmallPoly {
    dims: usize,
    exps: Vec<u32>,
    coefs: Vec<i128>,
    coefs_f64: Vec<f64>,
    abs_sum: f64,
    degree: i32,
}

impl Eq for SmallPoly {}

/// Integers up to this magnitude are exact in `f64`.
const EXACT_F64: f64 = 9007199254740992.0;

impl SmallPoly {
    fn new(dims: usize, exps: Vec<u32>, coefs: Vec<i128>) -> Self {
        let degree = exps
            .chunks_exact(dims.max(1))
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0) as i32;
        let coefs_f64: Vec<f64> = coefs.iter().map(|&c| c as f64).collect();
        SmallPoly {
            dims,
            abs_sum: coefs_f64.iter().map(|c| c.abs()).sum(),
            exps,
            coefs,
            coefs_f64,
            degree,
        }
    }

    /// Floating-point evaluation when `sum |c| * max|base|^degree` bounds
    /// every partial result below 2^53, so the value is exact.
    fn eval_exact_f64(&self, base: &[i64]) -> Option<f64> {
        let m = base.iter().fold(1i64, |m, b| m.max(b.abs())) as f64;
        if self.abs_sum * m.powi(self.degree) >= EXACT_F64 {
            return None;
        }
        const D: usize = 4;
        const E: usize = 8;
        if self.dims <= D && (self.degree as usize) < E {
            let mut pw = [[1.0f64; E]; D];
            for (row, &b) in pw.iter_mut().zip(base) {
                for e in 1..=self.degree as usize {
                    row[e] = row[e - 1] * b as f64;
                }
            }
            let mut acc = 0.0;
            for (c, exps) in self.coefs_f64.iter().zip(self.exps.chunks_exact(self.dims.max(1))) {
                let mut v = *c;
                for (row, &p) in pw.iter().zip(exps) {
                    v *= row[p as usize];
                }
                acc += v;
            }
            return Some(acc);
        }
        let mut acc = 0.0;
        for (c, exps) in self.coefs_f64.iter().zip(self.exps.chunks_exact(self.dims.max(1))) {
            let mut v = *c;
            for (&p, &b) in exps.iter().zip(base) {
                for _ in 0..p {
                    v *= b as f64;
                }
            }
            acc += v;
        }
        Some(acc)
    }

    fn eval(&self, base: &[i64]) -> Option<i128> {
        let mut acc: i128 = 0;
        for (c, exps) in self.coefs.iter().zip(self.exps.chunks_exact(self.dims.max(1))) {
            let mut v = *c;
            for (&p, &b) in exps.iter().zip(base) {
                for _ in 0..p {
                    v = v.checked_mul(b as i128)?;
                }
            }
            acc = acc.checked_add(v)?;
        }
        Some(acc)
    }
}

impl CompiledTerm {
    fn new(shift: Vec<i32>, big: Vec<(Vec<u32>, BigInt)>) -> Self {
        let dims = shift.len();
        let coefs: Option<Vec<i128>> = big.iter().map(|(_, c)| c.to_i128()).collect();
        let small =
            coefs.map(|coefs| SmallPoly::new(dims, big.iter().flat_map(|(p, _)| p.iter().copied()).collect(), coefs));
        CompiledTerm { shift, small, big }
    }

    /// Coefficient at `base`; `None` when it vanishes exactly.
    pub fn eval(&self, base: &[i64]) -> Option<f64> {
        if let Some(v) = self.small.as_ref().and_then(|s| s.eval_exact_f64(base)) {
            return if v == 0.0 { None } else { Some(v) };
        }
        if let Some(v) = self.small.as_ref().and_then(|s| s.eval(base)) {
            return if v == 0 { None } else { Some(v as f64) };
        }
        let mut acc = BigInt::zero();
        for (pows, c) in &self.big {
            let mut v = c.clone();
            for (&p, &b) in pows.iter().zip(base) {
                v *= num_traits::pow(BigInt::from(b), p as usize);
            }
            acc += v;
        }
        if acc.is_zero() {
            None
        } else {
            Some(acc.to_f64().unwrap_or(f64::NAN))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompiledShiftOp {
    pub terms: Vec<CompiledTerm>,
}
