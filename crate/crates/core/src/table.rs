//! Dense tables of Galerkin integrals `a(i,j,k)`, `b(i,k)`, `c(k)` over
//! indices `1..=N`, with per-entry provenance.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    A,
    B,
    C,
}

impl Kind {
    pub const ALL: [Kind; 3] = [Kind::A, Kind::B, Kind::C];

    pub fn dims(self) -> usize {
        match self {
            Kind::A => 3,
            Kind::B => 2,
            Kind::C => 1,
        }
    }

    pub fn index_names(self) -> &'static [&'static str] {
        match self {
            Kind::A => &["i", "j", "k"],
            Kind::B => &["i", "k"],
            Kind::C => &["k"],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::A => "a",
            Kind::B => "b",
            Kind::C => "c",
        }
    }

    pub fn parse(s: &str) -> Result<Kind> {
        match s {
            "a" => Ok(Kind::A),
            "b" => Ok(Kind::B),
            "c" => Ok(Kind::C),
            _ => Err(Error::usage(format!("unknown table kind {s:?}"))),
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    Unset,
    Seed,
    /// Solved from operator `op`, pivoting on its term with shift `shift`.
    Derived {
        op: Arc<str>,
        shift: Arc<[i32]>,
    },
    Quadrature,
    /// Computed by quadrature because no recurrence reached it.
    Fallback,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceCounts {
    pub seed: usize,
    pub derived: usize,
    pub quadrature: usize,
    pub fallback: usize,
    pub unset: usize,
}

impl ProvenanceCounts {
    pub fn total(&self) -> usize {
        self.seed + self.derived + self.quadrature + self.fallback + self.unset
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegralTable {
    kind: Kind,
    n: usize,
    values: Vec<f64>,
    provenance: Vec<Provenance>,
}

/// Every index vector of `1..=n` per dimension, by ascending index sum, then
/// lexicographically.
pub fn sweep_order(dims: usize, n: usize) -> Vec<Vec<i64>> {
    let flat = sweep_order_flat(dims, n);
    flat.chunks_exact(dims.max(1)).map(|c| c.to_vec()).collect()
}

/// [`sweep_order`] concatenated into one vector with stride `dims`.
pub(crate) fn sweep_order_flat(dims: usize, n: usize) -> Vec<i64> {
    let count = n.pow(dims as u32);
    let mut keys: Vec<(i64, usize)> = (0..count)
        .map(|pos| {
            let mut p = pos;
            let mut sum = 0;
            for _ in 0..dims {
                sum += (p % n) as i64 + 1;
                p /= n;
            }
            (sum, pos)
        })
        .collect();
    // row-major position order is lexicographic order
    keys.sort_unstable();
    let mut out = vec![0i64; count * dims];
    for (slot, &(_, pos)) in out.chunks_exact_mut(dims.max(1)).zip(&keys) {
        let mut p = pos;
        for v in slot.iter_mut().rev() {
            *v = (p % n) as i64 + 1;
            p /= n;
        }
    }
    out
}

impl IntegralTable {
    pub fn new(kind: Kind, n: usize) -> Self {
        let len = n.pow(kind.dims() as u32);
        IntegralTable {
            kind,
            n,
            values: vec![0.0; len],
            provenance: vec![Provenance::Unset; len],
        }
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Row-major position of a 1-based index vector, if in bounds.
    pub fn position(&self, idx: &[i64]) -> Option<usize> {
        if idx.len() != self.kind.dims() {
            return None;
        }
        let mut p = 0usize;
        for &v in idx {
            if v < 1 || v > self.n as i64 {
                return None;
            }
            p = p * self.n + (v - 1) as usize;
        }
        Some(p)
    }

    pub fn index_of(&self, pos: usize) -> Vec<i64> {
        let mut idx = vec![0; self.kind.dims()];
        let mut p = pos;
        for slot in idx.iter_mut().rev() {
            *slot = (p % self.n) as i64 + 1;
            p /= self.n;
        }
        idx
    }

    pub fn in_bounds(&self, idx: &[i64]) -> bool {
        self.position(idx).is_some()
    }

    pub fn is_set(&self, idx: &[i64]) -> bool {
        self.position(idx)
            .map(|p| self.provenance[p] != Provenance::Unset)
            .unwrap_or(false)
    }

    /// Value at `idx`, or `None` when out of bounds or unset.
    pub fn get(&self, idx: &[i64]) -> Option<f64> {
        let p = self.position(idx)?;
        (self.provenance[p] != Provenance::Unset).then_some(self.values[p])
    }

    pub fn value(&self, idx: &[i64]) -> Result<f64> {
        self.get(idx).ok_or_else(|| Error::OutOfRange {
            kind: self.kind.to_string(),
            index: idx.to_vec(),
        })
    }

    pub fn provenance(&self, idx: &[i64]) -> Option<&Provenance> {
        self.position(idx).map(|p| &self.provenance[p])
    }

    pub fn set(&mut self, idx: &[i64], value: f64, provenance: Provenance) -> Result<()> {
        let p = self.position(idx).ok_or_else(|| Error::OutOfRange {
            kind: self.kind.to_string(),
            index: idx.to_vec(),
        })?;
        self.values[p] = value;
        self.provenance[p] = provenance;
        Ok(())
    }

    pub(crate) fn set_at(&mut self, pos: usize, value: f64, provenance: Provenance) {
        self.values[pos] = value;
        self.provenance[pos] = provenance;
    }

    pub(crate) fn raw_values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_complete(&self) -> bool {
        !self.provenance.contains(&Provenance::Unset)
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.provenance)
            .filter(|(_, p)| **p != Provenance::Unset)
            .fold(0.0, |m, (v, _)| m.max(v.abs()))
    }

    pub fn counts(&self) -> ProvenanceCounts {
        let mut c = ProvenanceCounts::default();
        for p in &self.provenance {
            match p {
                Provenance::Unset => c.unset += 1,
                Provenance::Seed => c.seed += 1,
                Provenance::Derived { .. } => c.derived += 1,
                Provenance::Quadrature => c.quadrature += 1,
                Provenance::Fallback => c.fallback += 1,
            }
        }
        c
    }

    /// Entries that are negligible against the table scale,
    /// `|value| < 1e-9 * max |entry|`.
    pub fn is_structural_zero(&self, idx: &[i64]) -> bool {
        self.get(idx).map(|v| v.abs() < 1e-9 * self.max_abs()).unwrap_or(false)
    }

    /// Entrywise comparison against a reference table: an entry agrees when
    /// `|x - y| <= rel * |y|`, or, for `|y| < abs`, when `|x - y| <= abs`.
    pub fn compare(&self, reference: &IntegralTable, rel: f64, abs: f64) -> Result<Agreement> {
        if self.kind != reference.kind || self.n != reference.n {
            return Err(Error::usage("tables differ in kind or size"));
        }
        let mut out = Agreement {
            worst_score: 0.0,
            worst_index: None,
            max_relative: 0.0,
            max_normalized: 0.0,
            failures: 0,
        };
        let scale = reference.max_abs().max(f64::MIN_POSITIVE);
        for pos in 0..self.values.len() {
            let (x, y) = (self.values[pos], reference.values[pos]);
            let diff = (x - y).abs();
            let score = if y.abs() >= abs {
                diff / (rel * y.abs())
            } else {
                diff / abs
            };
            if y.abs() >= abs {
                out.max_relative = out.max_relative.max(diff / y.abs());
            }
            out.max_normalized = out.max_normalized.max(diff / scale);
            if !(score <= 1.0) {
                out.failures += 1;
            }
            if !(score <= out.worst_score) {
                out.worst_score = score;
                out.worst_index = Some(self.index_of(pos));
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> TableJson {
        let entries = (0..self.values.len())
            .map(|pos| {
                let (provenance, via, fallback) = match &self.provenance[pos] {
                    Provenance::Unset => ("unset", None, false),
                    Provenance::Seed => ("seed", None, false),
                    Provenance::Derived { op, shift } => ("derived", Some(format!("{op}{shift:?}")), false),
                    Provenance::Quadrature => ("quadrature", None, false),
                    Provenance::Fallback => ("quadrature", None, true),
                };
                EntryJson {
                    idx: self.index_of(pos).into_iter().map(|v| v as usize).collect(),
                    value: self.values[pos],
                    provenance: provenance.to_string(),
                    via,
                    fallback,
                }
            })
            .collect();
        TableJson {
            kind: self.kind,
            n: self.n,
            entries,
        }
    }

    pub fn from_json(j: &TableJson) -> Result<Self> {
        let mut t = IntegralTable::new(j.kind, j.n);
        for e in &j.entries {
            let idx: Vec<i64> = e.idx.iter().map(|&v| v as i64).collect();
            let prov = match (e.provenance.as_str(), e.fallback) {
                ("seed", _) => Provenance::Seed,
                ("derived", _) => parse_via(e.via.as_deref().unwrap_or_default()),
                ("quadrature", false) => Provenance::Quadrature,
                ("quadrature", true) => Provenance::Fallback,
                ("unset", _) => Provenance::Unset,
                (other, _) => return Err(Error::usage(format!("unknown provenance {other:?}"))),
            };
            t.set(&idx, e.value, prov)?;
        }
        Ok(t)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json())?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let j: TableJson = serde_json::from_str(&text)?;
        IntegralTable::from_json(&j)
    }
}

/// Inverse of the `via` text `"Ga1[0, 1, 0]"`; the shift is dropped if
/// unreadable.
fn parse_via(via: &str) -> Provenance {
    let (op, shift) = match via.find('[') {
        Some(p) => (&via[..p], &via[p..]),
        None => (via, ""),
    };
    let shift: Vec<i32> = serde_json::from_str(shift).unwrap_or_default();
    Provenance::Derived {
        op: op.into(),
        shift: shift.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    /// Largest error in units of the allowed tolerance; `<= 1` means agreement.
    pub worst_score: f64,
    pub worst_index: Option<Vec<i64>>,
    /// Largest relative error over entries above the absolute floor.
    pub max_relative: f64,
    /// Largest absolute error divided by the reference table's max entry.
    pub max_normalized: f64,
    pub failures: usize,
}

impl Agreement {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableJson {
    pub kind: Kind,
    #[serde(rename = "N")]
    pub n: usize,
    pub entries: Vec<EntryJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntryJson {
    pub idx: Vec<usize>,
    pub value: f64,
    pub provenance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub via: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fallback: bool,
}
