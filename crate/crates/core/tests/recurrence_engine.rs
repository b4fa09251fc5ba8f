use proptest::prelude::*;

use sga_core::integrals::{full_table_quadrature, seed_integral, QuadraturePolicy};
use sga_core::operator::rat_frac;
use sga_core::problem::SIN_SYSTEM;
use sga_core::recurrence::{
    fill_table, minimal_seed_report, verify_annihilation, FillOutcome, OperatorFile, RecurrenceOperator,
    RecurrenceSystem,
};
use sga_core::table::{IntegralTable, Kind, Provenance};
use sga_core::Error;

fn system(kind: Kind) -> RecurrenceSystem {
    OperatorFile::builtin("sin-system").unwrap().system(kind).unwrap()
}

fn auto_fill(sys: &RecurrenceSystem, n: usize) -> FillOutcome {
    let p = QuadraturePolicy::default();
    let seeds: Vec<(Vec<i64>, f64)> = minimal_seed_report(sys, n)
        .unwrap()
        .into_iter()
        .map(|idx| {
            let v = seed_integral(sys.kind, &idx, &SIN_SYSTEM, &p).unwrap();
            (idx, v)
        })
        .collect();
    fill_table(sys, &seeds, n, |idx| seed_integral(sys.kind, idx, &SIN_SYSTEM, &p)).unwrap()
}

fn oracle(kind: Kind, n: usize) -> IntegralTable {
    full_table_quadrature(kind, n, &SIN_SYSTEM, &QuadraturePolicy::default())
        .unwrap()
        .table
}

#[test]
fn oracle_equivalence_at_ten() {
    for kind in Kind::ALL {
        let filled = auto_fill(&system(kind), 10);
        assert!(filled.fallbacks.is_empty(), "{kind}: {:?}", filled.fallbacks);
        let agreement = filled.table.compare(&oracle(kind, 10), 1e-6, 1e-8).unwrap();
        assert!(agreement.passed(), "{kind}: {agreement:?}");
    }
}

#[test]
fn c_table_from_recurrence() {
    let t = auto_fill(&system(Kind::C), 15).table;
    let sqrt_pi = std::f64::consts::PI.sqrt();
    for k in 1..=15 {
        let v = t.get(&[k]).unwrap();
        let want = if k == 2 { sqrt_pi } else { 0.0 };
        assert!((v - want).abs() <= 1e-10, "c({k}) = {v}");
    }
    assert!(matches!(t.provenance(&[5]), Some(Provenance::Derived { .. })));
}

#[test]
fn smallest_instance() {
    for kind in Kind::ALL {
        let sys = system(kind);
        let seeds = minimal_seed_report(&sys, 1).unwrap();
        assert_eq!(seeds.len(), 1);
        let out = auto_fill(&sys, 1);
        assert_eq!(out.counts.seed, 1);
        assert!(out.table.is_complete());
    }
}

#[test]
fn seed_counts_are_small() {
    let a = minimal_seed_report(&system(Kind::A), 10).unwrap();
    assert_eq!(a, vec![vec![1, 1, 1], vec![1, 2, 1], vec![1, 3, 2]]);
    let c = minimal_seed_report(&system(Kind::C), 10).unwrap();
    assert_eq!(c, vec![vec![1], vec![2]]);
    let b = minimal_seed_report(&system(Kind::B), 10).unwrap();
    assert!(b.len() < 100 / 4, "{} b seeds", b.len());
}

#[test]
fn accounting_identity() {
    let out = auto_fill(&system(Kind::A), 15);
    let c = out.counts;
    assert_eq!(c.seed + c.derived + c.fallback, 15 * 15 * 15);
    assert_eq!(c.unset, 0);
}

#[test]
fn fill_is_deterministic() {
    let a = auto_fill(&system(Kind::B), 10).table.to_json();
    let b = auto_fill(&system(Kind::B), 10).table.to_json();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn filled_a_table_is_symmetric() {
    let t = auto_fill(&system(Kind::A), 10).table;
    let tol = 1e-9 * t.max_abs();
    for i in 1..=10 {
        for j in 1..=10 {
            for k in 1..=10 {
                let (x, y) = (t.get(&[i, j, k]).unwrap(), t.get(&[j, i, k]).unwrap());
                assert!((x - y).abs() <= tol, "a({i},{j},{k}) = {x}, a({j},{i},{k}) = {y}");
            }
        }
    }
}

#[test]
fn table_json_round_trip() {
    let t = auto_fill(&system(Kind::A), 4).table;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.json");
    t.write_json(&path).unwrap();
    let back = IntegralTable::read_json(&path).unwrap();
    assert_eq!(back, t);
}

#[test]
fn shipped_verified_operators_pass() {
    for kind in Kind::ALL {
        let report = verify_annihilation(&system(kind), &oracle(kind, 8), 1e-6).unwrap();
        assert!(report.passed(), "{kind}: {:?}", report.failed_ids());
    }
}

#[test]
fn listed_failures_are_identified() {
    let file = OperatorFile::listed().unwrap();
    let mut failed = Vec::new();
    for kind in Kind::ALL {
        let report = verify_annihilation(&file.system(kind).unwrap(), &oracle(kind, 8), 1e-6).unwrap();
        failed.extend(report.failed_ids().into_iter().map(String::from));
    }
    assert_eq!(failed, ["Ga2", "Ga3", "Gb3"]);
}

#[test]
fn corrupted_coefficient_is_caught() {
    let text = include_str!("../../../data/sin-system-verified.json")
        .replace("4*(k+1)*(i+1)*(i-k-2)", "4*(k+1)*(i+1)*(i-k-3)");
    let file = OperatorFile::parse(&text).unwrap();
    let report = verify_annihilation(&file.system(Kind::B).unwrap(), &oracle(Kind::B, 8), 1e-6).unwrap();
    assert_eq!(report.failed_ids(), ["Gb1"]);
}

#[test]
fn parse_errors_have_positions() {
    let err = OperatorFile::parse("{\n  \"families\": [\n    { \"kind\": \"a\", \"operators\": [ { \"id\": \"x\", \"expr\": \"S_i +\" } ] }\n  ]\n}").unwrap_err();
    assert!(matches!(err, Error::Parse { .. }), "{err:?}");
    let err = OperatorFile::parse("{ \"families\": [ { \"kind\": \"q\" } ] }").unwrap_err();
    assert!(matches!(err, Error::Parse { line: 1, .. }), "{err:?}");
}

#[test]
fn excluded_family_falls_back() {
    let mut sys = system(Kind::C);
    sys.exclude(&["Gc".to_string()]).unwrap();
    let out = auto_fill(&sys, 6);
    assert_eq!(out.counts.fallback + out.counts.seed, 6);
    assert_eq!(out.counts.derived, 0);
}

fn scaled(sys: &RecurrenceSystem, num: i64, den: i64) -> RecurrenceSystem {
    let ops = sys
        .operators
        .iter()
        .map(|o| RecurrenceOperator::new(o.id.clone(), o.op.scale(&rat_frac(num, den))).unwrap())
        .collect();
    RecurrenceSystem::new(sys.kind, ops).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn scale_invariance(num in prop_oneof![-9i64..=-1, 1i64..=9], den in 1i64..=7, kind_ix in 0usize..3, n in 2usize..=8) {
        let kind = Kind::ALL[kind_ix];
        let sys = system(kind);
        let base = auto_fill(&sys, n);
        let seeds: Vec<(Vec<i64>, f64)> = (0..base.table.len())
            .map(|p| base.table.index_of(p))
            .filter(|idx| matches!(base.table.provenance(idx), Some(Provenance::Seed)))
            .map(|idx| { let v = base.table.get(&idx).unwrap(); (idx, v) })
            .collect();
        let other = fill_table(&scaled(&sys, num, den), &seeds, n, |_| unreachable!()).unwrap();
        for p in 0..base.table.len() {
            let idx = base.table.index_of(p);
            prop_assert_eq!(base.table.get(&idx).unwrap().to_bits(), other.table.get(&idx).unwrap().to_bits());
        }
    }

    #[test]
    fn small_sizes_match_oracle(n in 1usize..=10, kind_ix in 0usize..3) {
        let kind = Kind::ALL[kind_ix];
        let filled = auto_fill(&system(kind), n);
        let agreement = filled.table.compare(&oracle(kind, n), 1e-6, 1e-8).unwrap();
        prop_assert!(agreement.passed(), "{} N={}: {:?}", kind, n, agreement);
    }
}
