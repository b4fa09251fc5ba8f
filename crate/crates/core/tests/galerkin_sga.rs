use std::sync::OnceLock;

use proptest::prelude::*;

use sga_core::cli::{build_tables, solve, RunConfig};
use sga_core::control::{grid, ValueFunction};
use sga_core::galerkin::{riccati_initial_guess, GalerkinSystem, SgaConfig, SgaResult};
use sga_core::problem::{ProblemSpec, LINEAR, SIN_SYSTEM};
use sga_core::table::IntegralTable;

fn tables(problem: &str, n: usize) -> [IntegralTable; 3] {
    let cfg = RunConfig {
        problem: problem.to_string(),
        n,
        ..RunConfig::default()
    };
    build_tables(&cfg).unwrap().tables
}

fn sin_result(n: usize) -> &'static SgaResult {
    static CACHE: [OnceLock<SgaResult>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let slot = match n {
        4 => 0,
        8 => 1,
        14 => 2,
        _ => panic!("uncached size {n}"),
    };
    CACHE[slot].get_or_init(|| solve(&tables("sin-system", n), 1e-9, 50).unwrap())
}

fn sup_residual(r: &SgaResult, spec: &ProblemSpec) -> f64 {
    let vf = ValueFunction::new(r.v_star.clone());
    grid(-2.0, 2.0, 401)
        .into_iter()
        .map(|x| vf.hjb_residual(x, spec).abs())
        .fold(0.0, f64::max)
}

#[test]
fn linear_problem_gives_riccati_value() {
    let r = solve(&tables("linear", 2), 1e-9, 50).unwrap();
    assert!(r.converged);
    assert!(r.iterations <= 2);
    let want = (1.0 + 2f64.sqrt()) / 8.0;
    assert!(r.v_star[0].abs() <= 1e-9);
    assert!((r.v_star[1] - want).abs() <= 1e-9);
}

#[test]
fn sin_system_converges_at_fourteen() {
    let r = sin_result(14);
    assert!(r.converged, "{:?}", r.residual_history);
    assert!(r.iterations < 50);
    assert_eq!(r.tables.len(), 3);
}

#[test]
fn converged_results_are_fixed_points() {
    for n in [4, 8, 14] {
        let r = sin_result(n);
        let [a, b, c] = tables("sin-system", n);
        let sys = GalerkinSystem::assemble(&a, &b, &c).unwrap();
        let le = sys.le_residual(&r.v_star, &r.v_star).unwrap();
        let max = le.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(r.converged && max <= 1e-9, "N={n}: {max}");
    }
}

#[test]
fn huge_eps_returns_initial_guess() {
    let r = solve(&tables("sin-system", 6), 1e300, 50).unwrap();
    assert_eq!(r.iterations, 0);
    assert_eq!(r.v_star, riccati_initial_guess(6));
}

#[test]
fn iteration_limit_is_reported() {
    let r = solve(&tables("sin-system", 8), 1e-30, 2).unwrap();
    assert!(!r.converged);
    assert_eq!(r.iterations, 2);
    assert_eq!(r.residual_history.len(), 2);
}

#[test]
fn truncation_improves_with_n() {
    let coarse = sup_residual(sin_result(4), &SIN_SYSTEM);
    let fine = sup_residual(sin_result(14), &SIN_SYSTEM);
    assert!(fine < coarse, "N=14 {fine} vs N=4 {coarse}");
}

#[test]
fn linear_residual_vanishes() {
    let r = solve(&tables("linear", 2), 1e-9, 50).unwrap();
    assert!(sup_residual(&r, &LINEAR) <= 1e-9);
}

fn system_6() -> &'static GalerkinSystem {
    static SYS: OnceLock<GalerkinSystem> = OnceLock::new();
    SYS.get_or_init(|| {
        let [a, b, c] = tables("sin-system", 6);
        GalerkinSystem::assemble(&a, &b, &c).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn permutation_consistency(perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(), scale in 0.2f64..1.5) {
        let sys = system_6();
        let v0: Vec<f64> = riccati_initial_guess(6).iter().map(|v| v * scale).collect();
        let step = sys.sga_step(&v0).unwrap();
        let permuted = sys.permuted(&perm).unwrap();
        let v0p: Vec<f64> = perm.iter().map(|&p| v0[p]).collect();
        let stepp = permuted.sga_step(&v0p).unwrap();
        for (m, &p) in perm.iter().enumerate() {
            prop_assert!((stepp[m] - step[p]).abs() <= 1e-9 * step[p].abs().max(1e-6));
        }
        let start = riccati_initial_guess(6);
        let startp: Vec<f64> = perm.iter().map(|&p| start[p]).collect();
        let r = sys.sga_run(&SgaConfig::new(start, 1e-9, 50)).unwrap();
        let rp = permuted.sga_run(&SgaConfig::new(startp, 1e-9, 50)).unwrap();
        prop_assert!(r.converged && rp.converged);
        for (m, &p) in perm.iter().enumerate() {
            prop_assert!((rp.v_star[m] - r.v_star[p]).abs() <= 1e-8 * r.v_star[p].abs().max(1e-6));
        }
    }

    #[test]
    fn fixed_point_consistency(n in 2usize..=9) {
        let r = solve(&tables("sin-system", n), 1e-9, 50).unwrap();
        if r.converged {
            let [a, b, c] = tables("sin-system", n);
            let sys = GalerkinSystem::assemble(&a, &b, &c).unwrap();
            let le = sys.le_residual(&r.v_star, &r.v_star).unwrap();
            prop_assert!(le.iter().all(|x| x.abs() <= 1e-9));
        }
    }
}
