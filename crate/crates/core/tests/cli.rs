use std::path::Path;
use std::process::{Command, Output};

use sga_core::galerkin::SgaResult;
use sga_core::table::{IntegralTable, Kind};

fn sga(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sga"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("run sga")
}

fn data(name: &str) -> String {
    format!("{}/../../data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn fill_sga_simulate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert!(sga(&["fill", "--n", "10"], out).status.success());
    let c = IntegralTable::read_json(&out.join("table_c.json")).unwrap();
    let sqrt_pi = std::f64::consts::PI.sqrt();
    for k in 1..=10 {
        let want = if k == 2 { sqrt_pi } else { 0.0 };
        assert!((c.get(&[k]).unwrap() - want).abs() < 1e-10);
    }
    let run = sga(&["sga", "--n", "10"], out);
    assert!(run.status.success(), "{}", stderr(&run));
    let result: SgaResult =
        serde_json::from_str(&std::fs::read_to_string(out.join("sga_result.json")).unwrap()).unwrap();
    assert!(result.converged);
    let history = std::fs::read_to_string(out.join("residual_history.csv")).unwrap();
    assert!(history.starts_with("iteration,residual\n0,"));
    assert_eq!(history.lines().count(), result.iterations + 2);
    let sim = sga(&["simulate", "--n", "10", "--x0", "0", "--tend", "1"], out);
    assert!(sim.status.success(), "{}", stderr(&sim));
    let traj = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(traj.lines().skip(1).all(|l| l.split(',').nth(1) == Some("0.0")));
    for f in ["value_scan_N10.csv", "residual_scan_N10.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let header = std::fs::read_to_string(out.join("residual_scan_N10.csv")).unwrap();
    assert!(header.starts_with("x,hjb_residual\n"));
}

#[test]
fn runs_are_bit_identical() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [d1.path(), d2.path()] {
        assert!(sga(&["fill", "--n", "8"], d).status.success());
        assert!(sga(&["sga", "--n", "8"], d).status.success());
    }
    for f in [
        "table_a.json",
        "table_b.json",
        "table_c.json",
        "sga_result.json",
        "residual_history.csv",
    ] {
        let a = std::fs::read(d1.path().join(f)).unwrap();
        let b = std::fs::read(d2.path().join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}

#[test]
fn linear_problem_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    assert!(sga(&["fill", "--problem", "linear", "--n", "2"], dir.path())
        .status
        .success());
    assert!(sga(&["sga", "--problem", "linear", "--n", "2"], dir.path())
        .status
        .success());
    let r: SgaResult =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sga_result.json")).unwrap()).unwrap();
    assert!((r.v_star[1] - (1.0 + 2f64.sqrt()) / 8.0).abs() < 1e-9);
}

#[test]
fn smallest_tables() {
    let dir = tempfile::tempdir().unwrap();
    assert!(sga(&["fill", "--n", "1"], dir.path()).status.success());
    for kind in Kind::ALL {
        let t = IntegralTable::read_json(&dir.path().join(format!("table_{kind}.json"))).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.counts().seed, 1);
    }
}

#[test]
fn oracle_flag_uses_quadrature() {
    let dir = tempfile::tempdir().unwrap();
    assert!(sga(&["fill", "--n", "4", "--oracle"], dir.path()).status.success());
    let a = IntegralTable::read_json(&dir.path().join("table_a.json")).unwrap();
    assert_eq!(a.counts().quadrature, 64);
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = sga(&["verify"], dir.path());
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    let t1 = sga(&["verify", "--ops", &data("sin-system-listed.json")], dir.path());
    assert_eq!(t1.status.code(), Some(4));
    assert!(stderr(&t1).contains("Ga2, Ga3, Gb3"), "{}", stderr(&t1));
    assert!(dir.path().join("verify.json").is_file());
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    // no tables yet
    assert_eq!(sga(&["sga", "--n", "5"], out).status.code(), Some(2));
    assert_eq!(sga(&["simulate"], out).status.code(), Some(2));
    assert_eq!(sga(&["fill", "--problem", "pendulum"], out).status.code(), Some(2));
    assert_eq!(sga(&["fill", "--exclude", "Gq"], out).status.code(), Some(2));
    let bad = out.join("bad.json");
    std::fs::write(
        &bad,
        "{\n  \"families\": [ { \"kind\": \"a\", \"operators\": [ { \"id\": \"x\", \"expr\": \"S_i*\" } ] } ]\n}",
    )
    .unwrap();
    let parse = sga(&["fill", "--ops", bad.to_str().unwrap()], out);
    assert_eq!(parse.status.code(), Some(3));
    assert!(stderr(&parse).contains("line"), "{}", stderr(&parse));
}

#[test]
fn exclusion_warns_about_fallbacks() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("seeds.json");
    std::fs::write(&empty, "{\"seeds\": []}").unwrap();
    let o = sga(
        &[
            "fill",
            "--n",
            "6",
            "--exclude",
            "Gc",
            "--seeds",
            empty.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning: table c"), "{}", stderr(&o));
}

#[test]
fn seed_file_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let o = sga(
        &["fill", "--n", "10", "--seeds", &data("sin-system-example-seeds.json")],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let a = IntegralTable::read_json(&dir.path().join("table_a.json")).unwrap();
    assert_eq!(a.counts().seed, 10);
}

#[test]
fn bench_reports_each_kind() {
    let dir = tempfile::tempdir().unwrap();
    let o = sga(&["bench", "--sizes", "4,6", "--repeats", "1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let report: sga_core::cli::BenchReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("bench.json")).unwrap()).unwrap();
    assert_eq!(report.runs.len(), 6);
    for r in &report.runs {
        let p = &r.provenance;
        assert_eq!(p.seed + p.derived + p.fallback + p.quadrature, r.entries);
        assert!(r.oracle_failures == 0);
    }
}
