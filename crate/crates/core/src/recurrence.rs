//! Filling integral tables from seed values with difference operators that
//! annihilate them, and checking such operators against reference tables.

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use web_time::Instant;

use crate::error::{Error, Result};
use crate::operator::{CompiledShiftOp, OperatorAlgebra, ShiftOp, ShiftOpJson};
use crate::table::{sweep_order_flat, IntegralTable, Kind, Provenance, ProvenanceCounts};

const SIN_SYSTEM_VERIFIED: &str = include_str!("../../../data/sin-system-verified.json");
const SIN_SYSTEM_LISTED: &str = include_str!("../../../data/sin-system-listed.json");

#[derive(Clone, Debug)]
pub struct RecurrenceOperator {
    pub id: String,
    pub op: ShiftOp,
    pub enabled: bool,
    compiled: CompiledShiftOp,
    tag: Arc<str>,
    shifts: Vec<Arc<[i32]>>,
}

impl RecurrenceOperator {
    pub fn new(id: impl Into<String>, op: ShiftOp) -> Result<Self> {
        let compiled = op.compile()?;
        let id: String = id.into();
        Ok(RecurrenceOperator {
            tag: id.as_str().into(),
            shifts: compiled.terms.iter().map(|t| t.shift.as_slice().into()).collect(),
            id,
            op,
            enabled: true,
            compiled,
        })
    }

    pub fn compiled(&self) -> &CompiledShiftOp {
        &self.compiled
    }
}

/// Ordered operators annihilating one kind of table.
#[derive(Clone, Debug)]
pub struct RecurrenceSystem {
    pub kind: Kind,
    pub operators: Vec<RecurrenceOperator>,
}

impl RecurrenceSystem {
    pub fn new(kind: Kind, operators: Vec<RecurrenceOperator>) -> Result<Self> {
        for o in &operators {
            if o.op.indices() != kind.index_names() {
                return Err(Error::usage(format!(
                    "operator {} is over {:?}, table {kind} needs {:?}",
                    o.id,
                    o.op.indices(),
                    kind.index_names()
                )));
            }
            if !o.op.params().is_empty() {
                return Err(Error::usage(format!(
                    "operator {} has free symbols {:?}",
                    o.id,
                    o.op.params()
                )));
            }
        }
        Ok(RecurrenceSystem { kind, operators })
    }

    pub fn empty(kind: Kind) -> Self {
        RecurrenceSystem {
            kind,
            operators: Vec::new(),
        }
    }

    pub fn enabled(&self) -> impl Iterator<Item = &RecurrenceOperator> {
        self.operators.iter().filter(|o| o.enabled)
    }

    pub fn operator(&self, id: &str) -> Option<&RecurrenceOperator> {
        self.operators.iter().find(|o| o.id == id)
    }

    /// Disables the named operators; unknown ids are an error.
    pub fn exclude(&mut self, ids: &[String]) -> Result<()> {
        for id in ids {
            let o = self
                .operators
                .iter_mut()
                .find(|o| &o.id == id)
                .ok_or_else(|| Error::usage(format!("no operator {id:?} for table {}", self.kind)))?;
            o.enabled = false;
        }
        Ok(())
    }
}

/// An operator file: one family of operators per table kind.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub families: Vec<FamilyJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyJson {
    pub kind: Kind,
    pub operators: Vec<OperatorJson>,
}

/// `expr` is parsed; `op`, when also present, must equal it.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorJson {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op: Option<ShiftOpJson>,
    #[serde(default = "yes", skip_serializing_if = "Clone::clone")]
    pub enabled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn yes() -> bool {
    true
}

impl OperatorJson {
    fn to_operator(&self, kind: Kind) -> Result<RecurrenceOperator> {
        let parsed = match &self.expr {
            Some(e) => Some(ShiftOp::parse(e, kind.index_names(), &[]).map_err(|err| match err {
                Error::Parse { line, column, message } => Error::Parse {
                    line,
                    column,
                    message: format!("operator {}: {message}", self.id),
                },
                other => other,
            })?),
            None => None,
        };
        let given = self.op.clone().map(ShiftOp::try_from).transpose()?;
        let op = match (parsed, given) {
            (Some(p), Some(g)) if p != g => {
                return Err(Error::usage(format!(
                    "operator {}: expr and op terms disagree",
                    self.id
                )))
            }
            (Some(p), _) => p,
            (None, Some(g)) => g,
            (None, None) => return Err(Error::usage(format!("operator {} has neither expr nor op", self.id))),
        };
        let mut out = RecurrenceOperator::new(&self.id, op)?;
        out.enabled = self.enabled;
        Ok(out)
    }
}

impl OperatorFile {
    /// Parses the file and every operator in it.
    pub fn parse(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.column(), e.to_string()))?;
        file.systems()?;
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The system for `kind`; empty when the file has no such family.
    pub fn system(&self, kind: Kind) -> Result<RecurrenceSystem> {
        let mut ops = Vec::new();
        for fam in self.families.iter().filter(|f| f.kind == kind) {
            for o in &fam.operators {
                ops.push(o.to_operator(kind)?);
            }
        }
        RecurrenceSystem::new(kind, ops)
    }

    pub fn systems(&self) -> Result<[RecurrenceSystem; 3]> {
        Ok([self.system(Kind::A)?, self.system(Kind::B)?, self.system(Kind::C)?])
    }

    /// Operators shipped for a built-in problem. `a` and `c` depend only on
    /// `g^2/R` and `q`, which the two built-in problems share.
    pub fn builtin(problem: &str) -> Result<Self> {
        let mut file = Self::parse(SIN_SYSTEM_VERIFIED)?;
        match problem {
            "sin-system" => {}
            "linear" => file.families.retain(|f| f.kind != Kind::B),
            other => return Err(Error::usage(format!("no shipped operators for problem {other:?}"))),
        }
        Ok(file)
    }

    /// The sin-system operators as originally listed, including the three
    /// that fail verification.
    pub fn listed() -> Result<Self> {
        Self::parse(SIN_SYSTEM_LISTED)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PivotSolution {
    pub value: f64,
    /// Position of the pivot among the operator's compiled terms.
    pub term: usize,
}

impl PivotSolution {
    pub fn shift<'a>(&self, op: &'a RecurrenceOperator) -> &'a [i32] {
        &op.compiled.terms[self.term].shift
    }
}

/// Solves the relation `op` for `target`. Each term of `op` is tried in turn
/// as the pivot, largest shift first, at the base point that places it on
/// `target`; the pivot coefficient must be exactly nonzero there, the base
/// point must be a valid degree vector (components in `0..=N`), every index
/// the operator touches must lie in the table, and every other term with a
/// nonzero coefficient must be set.
pub fn pivot_solve(op: &RecurrenceOperator, table: &IntegralTable, target: &[i64]) -> Option<PivotSolution> {
    let d = target.len();
    let n = table.n() as i64;
    let terms = &op.compiled.terms;
    let (mut base, mut at) = ([0i64; 3], [0i64; 3]);
    let mut known = [0.0f64; 8];
    'pivot: for (p, pt) in terms.iter().enumerate().rev() {
        for m in 0..d {
            base[m] = target[m] - pt.shift[m] as i64;
            if base[m] < 0 || base[m] > n {
                continue 'pivot;
            }
        }
        for t in terms {
            for m in 0..d {
                let v = base[m] + t.shift[m] as i64;
                if v < 1 || v > n {
                    continue 'pivot;
                }
            }
        }
        // dependencies first: an unset entry is acceptable only behind a
        // vanishing coefficient
        for (q, t) in terms.iter().enumerate() {
            if q == p {
                continue;
            }
            for m in 0..d {
                at[m] = base[m] + t.shift[m] as i64;
            }
            let slot = known.get_mut(q);
            match table.get(&at[..d]) {
                Some(v) => {
                    if let Some(s) = slot {
                        *s = v;
                    }
                }
                None => {
                    if t.eval(&base[..d]).is_some() {
                        continue 'pivot;
                    }
                    if let Some(s) = slot {
                        *s = f64::NAN;
                    }
                }
            }
        }
        let Some(pc) = pt.eval(&base[..d]) else { continue };
        let mut acc = 0.0;
        for (q, t) in terms.iter().enumerate() {
            if q == p {
                continue;
            }
            let v = match known.get(q) {
                Some(v) if v.is_nan() => continue,
                Some(v) => *v,
                None => {
                    for m in 0..d {
                        at[m] = base[m] + t.shift[m] as i64;
                    }
                    match table.get(&at[..d]) {
                        Some(v) => v,
                        None => continue,
                    }
                }
            };
            if let Some(c) = t.eval(&base[..d]) {
                acc += c * v;
            }
        }
        return Some(PivotSolution {
            value: -acc / pc,
            term: p,
        });
    }
    None
}

#[derive(Clone, Debug)]
pub struct FillOutcome {
    pub table: IntegralTable,
    pub counts: ProvenanceCounts,
    /// Entries computed by the fallback, in the order they were needed.
    pub fallbacks: Vec<Vec<i64>>,
    /// Time spent in recurrences, fallback calls excluded.
    pub recurrence_time: Duration,
    pub fallback_time: Duration,
}

/// Fills a table of size `n` from `seeds`. Unset entries are visited by
/// ascending index sum, then lexicographically, trying enabled operators in
/// order; passes repeat until nothing changes. If entries remain, the first
/// of them is computed by `fallback` and the passes resume.
pub fn fill_table(
    sys: &RecurrenceSystem,
    seeds: &[(Vec<i64>, f64)],
    n: usize,
    mut fallback: impl FnMut(&[i64]) -> Result<f64>,
) -> Result<FillOutcome> {
    if n == 0 {
        return Err(Error::usage("N must be at least 1"));
    }
    let start = Instant::now();
    let mut fallback_time = Duration::ZERO;
    let mut table = IntegralTable::new(sys.kind, n);
    for (idx, v) in seeds {
        table.set(idx, *v, Provenance::Seed)?;
    }
    let ops: Vec<&RecurrenceOperator> = sys.enabled().collect();
    let d = sys.kind.dims();
    let flat = sweep_order_flat(d, n);
    let order: Vec<&[i64]> = flat.chunks_exact(d).collect();
    let mut unset: Vec<usize> = (0..order.len()).filter(|&m| !table.is_set(order[m])).collect();
    let mut fallbacks = Vec::new();
    loop {
        loop {
            let before = unset.len();
            unset.retain(|&m| {
                let target = order[m];
                for op in &ops {
                    if let Some(sol) = pivot_solve(op, &table, target) {
                        let prov = Provenance::Derived {
                            op: op.tag.clone(),
                            shift: op.shifts[sol.term].clone(),
                        };
                        // in bounds by construction
                        let _ = table.set(target, sol.value, prov);
                        return false;
                    }
                }
                true
            });
            if unset.len() == before {
                break;
            }
        }
        if unset.is_empty() {
            break;
        }
        let m = unset.remove(0);
        let t0 = Instant::now();
        let v = fallback(order[m])?;
        fallback_time += t0.elapsed();
        table.set(order[m], v, Provenance::Fallback)?;
        fallbacks.push(order[m].to_vec());
    }
    Ok(FillOutcome {
        counts: table.counts(),
        table,
        fallbacks,
        recurrence_time: start.elapsed().saturating_sub(fallback_time),
        fallback_time,
    })
}

/// Entries a fill from no seeds would have to obtain by quadrature, in the
/// order it would ask for them. The fill logic depends only on which entries
/// are set, never on their values, so this is exact.
pub fn minimal_seed_report(sys: &RecurrenceSystem, n: usize) -> Result<Vec<Vec<i64>>> {
    Ok(fill_table(sys, &[], n, |_| Ok(0.0))?.fallbacks)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorReport {
    pub id: String,
    pub enabled: bool,
    /// Base points at which the operator lies entirely inside the table.
    pub checked: usize,
    pub max_residual: f64,
    pub worst_base: Option<Vec<i64>>,
    pub violations: Vec<Vec<i64>>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnihilationReport {
    pub kind: Kind,
    #[serde(rename = "N")]
    pub n: usize,
    pub tol: f64,
    pub operators: Vec<OperatorReport>,
}

impl AnnihilationReport {
    pub fn passed(&self) -> bool {
        self.operators.iter().all(|o| o.passed)
    }

    pub fn failed_ids(&self) -> Vec<&str> {
        self.operators
            .iter()
            .filter(|o| !o.passed)
            .map(|o| o.id.as_str())
            .collect()
    }
}

/// `|sum_t c_t(base) T(base + shift_t)| / (max|T| * max_t |c_t(base)|)`.
pub fn normalized_residual(op: &RecurrenceOperator, table: &IntegralTable, base: &[i64]) -> Option<f64> {
    let scale = table.max_abs();
    let mut acc = 0.0;
    let mut cmax = 0.0f64;
    for t in &op.compiled.terms {
        let Some(c) = t.eval(base) else { continue };
        let at: Vec<i64> = base.iter().zip(&t.shift).map(|(b, s)| b + *s as i64).collect();
        acc += c * table.get(&at)?;
        cmax = cmax.max(c.abs());
    }
    if cmax == 0.0 {
        return Some(0.0);
    }
    Some(if scale > 0.0 {
        acc.abs() / (scale * cmax)
    } else {
        acc.abs()
    })
}

/// Base points in `0..=n` at which every term of `op` lands inside `1..=n`.
pub fn base_points(op: &RecurrenceOperator, n: usize) -> Vec<Vec<i64>> {
    let terms = &op.compiled.terms;
    if terms.is_empty() {
        return Vec::new();
    }
    let d = terms[0].shift.len();
    let mut ranges = Vec::with_capacity(d);
    for m in 0..d {
        let lo = terms.iter().map(|t| t.shift[m]).min().unwrap_or(0) as i64;
        let hi = terms.iter().map(|t| t.shift[m]).max().unwrap_or(0) as i64;
        ranges.push(((1 - lo).max(0), (n as i64 - hi).min(n as i64)));
    }
    let mut out: Vec<Vec<i64>> = vec![vec![]];
    for (lo, hi) in ranges {
        out = out
            .into_iter()
            .flat_map(|p| {
                (lo..=hi).map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

/// Evaluates every operator of `sys`, enabled or not, at every base point
/// inside the table.
pub fn verify_annihilation(sys: &RecurrenceSystem, table: &IntegralTable, tol: f64) -> Result<AnnihilationReport> {
    if table.kind() != sys.kind {
        return Err(Error::usage(format!(
            "system for {} applied to table {}",
            sys.kind,
            table.kind()
        )));
    }
    if !table.is_complete() {
        return Err(Error::usage("table has unset entries"));
    }
    let mut reports = Vec::new();
    for op in &sys.operators {
        let mut rep = OperatorReport {
            id: op.id.clone(),
            enabled: op.enabled,
            checked: 0,
            max_residual: 0.0,
            worst_base: None,
            violations: Vec::new(),
            passed: true,
        };
        for base in base_points(op, table.n()) {
            let r = normalized_residual(op, table, &base).unwrap_or(f64::NAN);
            rep.checked += 1;
            if !(r <= tol) {
                rep.violations.push(base.clone());
            }
            if !(r <= rep.max_residual) {
                rep.max_residual = r;
                rep.worst_base = Some(base);
            }
        }
        rep.passed = rep.violations.is_empty();
        reports.push(rep);
    }
    Ok(AnnihilationReport {
        kind: sys.kind,
        n: table.n(),
        tol,
        operators: reports,
    })
}

/// Largest normalized residual of the relation that produced each derived
/// entry, re-evaluated on the finished table.
pub fn recheck_derived(sys: &RecurrenceSystem, table: &IntegralTable) -> f64 {
    let mut worst = 0.0f64;
    for pos in 0..table.len() {
        let idx = table.index_of(pos);
        if let Some(Provenance::Derived { op, shift }) = table.provenance(&idx) {
            let Some(o) = sys.operator(op) else { continue };
            let base: Vec<i64> = idx.iter().zip(shift.iter()).map(|(i, s)| i - *s as i64).collect();
            if let Some(r) = normalized_residual(o, table, &base) {
                worst = worst.max(r);
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c_system() -> RecurrenceSystem {
        let op = ShiftOp::parse("S_k^3", &["k"], &[]).unwrap();
        RecurrenceSystem::new(Kind::C, vec![RecurrenceOperator::new("Gc", op).unwrap()]).unwrap()
    }

    #[test]
    fn shift_cube_zeroes_the_tail() {
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let seeds = vec![(vec![1], 0.0), (vec![2], sqrt_pi), (vec![3], 0.0)];
        let out = fill_table(&c_system(), &seeds, 15, |_| panic!("no fallback expected")).unwrap();
        assert!(out.fallbacks.is_empty());
        assert_eq!(out.counts.seed, 3);
        assert_eq!(out.counts.derived, 12);
        for k in 4..=15 {
            assert_eq!(out.table.get(&[k]), Some(0.0));
        }
    }

    #[test]
    fn seed_report_for_shift_cube() {
        // c(3) = 0 comes from the base point k = 0
        assert_eq!(minimal_seed_report(&c_system(), 10).unwrap(), vec![vec![1], vec![2]]);
        assert_eq!(minimal_seed_report(&c_system(), 2).unwrap(), vec![vec![1], vec![2]]);
    }

    #[test]
    fn degenerate_pivot_is_skipped() {
        // (i - 2) S_i + 1: no information about entry 3
        let op = ShiftOp::parse("(i-2)*S_i + 1", &["i"], &[]).unwrap();
        let sys = RecurrenceSystem::new(Kind::C, vec![RecurrenceOperator::new("E", op).unwrap()]);
        assert!(sys.is_err(), "index names must match the table");
        let op = ShiftOp::parse("(k-2)*S_k + 1", &["k"], &[]).unwrap();
        let sys = RecurrenceSystem::new(Kind::C, vec![RecurrenceOperator::new("E", op).unwrap()]).unwrap();
        let mut t = IntegralTable::new(Kind::C, 5);
        t.set(&[2], 1.0, Provenance::Seed).unwrap();
        assert_eq!(pivot_solve(&sys.operators[0], &t, &[3]), None);
        let sol = pivot_solve(&sys.operators[0], &t, &[1]).unwrap();
        assert_eq!(sol.value, 1.0);
        assert_eq!(sol.shift(&sys.operators[0]), &[0]);
    }

    #[test]
    fn corrupted_entry_is_flagged() {
        let mut t = IntegralTable::new(Kind::C, 6);
        for k in 1..=6 {
            t.set(&[k], if k == 2 { 1.5 } else { 0.0 }, Provenance::Quadrature)
                .unwrap();
        }
        let rep = verify_annihilation(&c_system(), &t, 1e-10).unwrap();
        assert!(rep.passed());
        t.set(&[5], 1.0, Provenance::Quadrature).unwrap();
        let rep = verify_annihilation(&c_system(), &t, 1e-10).unwrap();
        assert_eq!(rep.failed_ids(), vec!["Gc"]);
        assert_eq!(rep.operators[0].violations, vec![vec![2]]);
        assert_eq!(rep.operators[0].checked, 4);
    }

    #[test]
    fn shipped_files_load() {
        for f in [
            OperatorFile::builtin("sin-system").unwrap(),
            OperatorFile::listed().unwrap(),
        ] {
            let [a, b, c] = f.systems().unwrap();
            assert_eq!(a.operators.len(), 3);
            assert!(!b.operators.is_empty());
            assert_eq!(c.operators.len(), 1);
        }
        assert!(OperatorFile::builtin("linear")
            .unwrap()
            .system(Kind::B)
            .unwrap()
            .operators
            .is_empty());
    }

    #[test]
    fn exclusion_by_id() {
        let mut s = c_system();
        s.exclude(&["Gc".to_string()]).unwrap();
        assert_eq!(s.enabled().count(), 0);
        assert!(s.exclude(&["nope".to_string()]).is_err());
    }
}
