//! The commands behind the `sga` binary: building tables, running SGA,
//! benchmarking, operator verification and closed-loop simulation.
//!
//! Every command reads and writes plain files under one output directory:
//!
//! | file | written by |
//! |------|------------|
//! | `table_a.json`, `table_b.json`, `table_c.json` | `fill` |
//! | `fill_summary.json` | `fill` |
//! | `sga_result.json`, `residual_history.csv` | `sga` |
//! | `bench.json` | `bench` |
//! | `verify.json` | `verify` |
//! | `value_scan_N{n}.csv`, `residual_scan_N{n}.csv`, `trajectory.csv` | `simulate` |

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use web_time::Instant;

use crate::control::{create_file, grid, simulate, write_residual_scan, write_value_scan, ValueFunction};
use crate::error::{Error, Result};
use crate::galerkin::{riccati_initial_guess, GalerkinSystem, SgaConfig, SgaResult, TableSummary};
use crate::integrals::{full_table_quadrature, seed_integral, QuadraturePolicy};
use crate::problem::ProblemSpec;
use crate::recurrence::{
    fill_table, minimal_seed_report, verify_annihilation, AnnihilationReport, OperatorFile, RecurrenceSystem,
};
use crate::table::{IntegralTable, Kind, ProvenanceCounts};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;
pub const EXIT_SINGULAR: i32 = 5;
pub const EXIT_DIVERGENCE: i32 = 6;
pub const EXIT_QUADRATURE: i32 = 7;
pub const EXIT_IO: i32 = 8;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Usage(_) | Error::Domain(_) | Error::OutOfRange { .. } => EXIT_USAGE,
        Error::Parse { .. } | Error::Json(_) => EXIT_PARSE,
        Error::Singular { .. } => EXIT_SINGULAR,
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        Error::Quadrature { .. } => EXIT_QUADRATURE,
        Error::Io(_) | Error::Csv(_) => EXIT_IO,
    }
}

/// Fraction of fallback entries above which `fill` warns.
pub const FALLBACK_WARN_FRACTION: f64 = 0.2;

/// Normalized annihilation residual accepted by `verify`.
pub const VERIFY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub enum SeedSource {
    /// The entries a seedless fill would request, computed by quadrature.
    Auto,
    File(PathBuf),
}

impl std::str::FromStr for SeedSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "auto" => SeedSource::Auto,
            path => SeedSource::File(PathBuf::from(path)),
        })
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub problem: String,
    pub n: usize,
    pub quadrature: QuadraturePolicy,
    pub eps: f64,
    pub l_max: usize,
    pub dt: f64,
    pub t_end: f64,
    pub x0: f64,
    pub ops: Option<PathBuf>,
    pub out: PathBuf,
    /// Fill every table by quadrature instead of recurrences.
    pub oracle: bool,
    pub seeds: SeedSource,
    /// Operator ids to disable.
    pub exclude: Vec<String>,
    pub bench_sizes: Vec<usize>,
    pub bench_repeats: usize,
    pub scan_range: (f64, f64),
    pub scan_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: "sin-system".to_string(),
            n: 10,
            quadrature: QuadraturePolicy::default(),
            eps: 1e-9,
            l_max: 50,
            dt: 1e-3,
            t_end: 10.0,
            x0: 4.0,
            ops: None,
            out: PathBuf::from("."),
            oracle: false,
            seeds: SeedSource::Auto,
            exclude: Vec::new(),
            bench_sizes: vec![10, 15],
            bench_repeats: 5,
            scan_range: (-5.0, 5.0),
            scan_points: 201,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [("eps", self.eps), ("dt", self.dt), ("tend", self.t_end)];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(Error::usage(format!("--{name} must be positive, got {v}")));
        }
        if self.n == 0 || self.l_max == 0 || self.bench_repeats == 0 {
            return Err(Error::usage("--n, --lmax and the repeat count must be at least 1"));
        }
        if self.bench_sizes.contains(&0) {
            return Err(Error::usage("benchmark sizes must be at least 1"));
        }
        if !self.x0.is_finite() {
            return Err(Error::usage("--x0 must be finite"));
        }
        for path in self.ops.iter().chain(match &self.seeds {
            SeedSource::File(p) => Some(p),
            SeedSource::Auto => None,
        }) {
            if !path.is_file() {
                return Err(Error::usage(format!("no such file: {}", path.display())));
            }
        }
        ProblemSpec::by_label(&self.problem)?;
        Ok(())
    }

    pub fn spec(&self) -> Result<ProblemSpec> {
        ProblemSpec::by_label(&self.problem)
    }

    pub fn table_path(&self, kind: Kind) -> PathBuf {
        self.out.join(format!("table_{kind}.json"))
    }

    pub fn result_path(&self) -> PathBuf {
        self.out.join("sga_result.json")
    }

    /// Recurrence systems from `--ops` or the shipped set, with `--exclude` applied.
    pub fn systems(&self) -> Result<[RecurrenceSystem; 3]> {
        let file = match &self.ops {
            Some(p) => OperatorFile::read(p)?,
            None => OperatorFile::builtin(&self.problem)?,
        };
        let mut systems = file.systems()?;
        for id in &self.exclude {
            let sys = systems
                .iter_mut()
                .find(|s| s.operator(id).is_some())
                .ok_or_else(|| Error::usage(format!("--exclude: no operator {id:?}")))?;
            sys.exclude(std::slice::from_ref(id))?;
        }
        Ok(systems)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedFile {
    #[serde(default)]
    pub description: Option<String>,
    pub seeds: Vec<SeedEntry>,
}

/// One seed. Without `value` the entry is computed by quadrature;
/// `rounded` is a printed reference value and is never used.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedEntry {
    pub kind: Kind,
    pub idx: Vec<i64>,
    #[serde(default)]
    pub value: Option<f64>,
    #[serde(default)]
    pub rounded: Option<f64>,
}

impl SeedFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.column(), e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Table indices with their seed values.
pub type Seeds = Vec<(Vec<i64>, f64)>;

/// Seed values for one table with the time spent computing them. Seeds
/// outside `1..=n` are dropped.
pub fn resolve_seeds(
    source: &SeedSource,
    sys: &RecurrenceSystem,
    n: usize,
    spec: &ProblemSpec,
    policy: &QuadraturePolicy,
) -> Result<(Seeds, Duration)> {
    let kind = sys.kind;
    let wanted: Vec<(Vec<i64>, Option<f64>)> = match source {
        SeedSource::Auto => minimal_seed_report(sys, n)?.into_iter().map(|i| (i, None)).collect(),
        SeedSource::File(p) => SeedFile::read(p)?
            .seeds
            .into_iter()
            .filter(|s| {
                s.kind == kind && s.idx.len() == kind.dims() && s.idx.iter().all(|&v| (1..=n as i64).contains(&v))
            })
            .map(|s| (s.idx, s.value))
            .collect(),
    };
    let start = Instant::now();
    let mut seeds = Vec::with_capacity(wanted.len());
    for (idx, value) in wanted {
        let v = match value {
            Some(v) => v,
            None => seed_integral(kind, &idx, spec, policy)?,
        };
        seeds.push((idx, v));
    }
    Ok((seeds, start.elapsed()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub kind: Kind,
    #[serde(rename = "N")]
    pub n: usize,
    pub provenance: ProvenanceCounts,
    pub fallbacks: Vec<Vec<i64>>,
    pub seed_seconds: f64,
    pub fill_seconds: f64,
    pub fallback_seconds: f64,
}

impl KindSummary {
    pub fn fallback_fraction(&self) -> f64 {
        self.provenance.fallback as f64 / self.provenance.total().max(1) as f64
    }
}

#[derive(Clone, Debug)]
pub struct BuiltTables {
    pub tables: [IntegralTable; 3],
    pub summaries: Vec<KindSummary>,
    pub warnings: Vec<String>,
}

impl BuiltTables {
    pub fn system(&self) -> Result<GalerkinSystem> {
        let [a, b, c] = &self.tables;
        GalerkinSystem::assemble(a, b, c)
    }
}

/// One table by the recurrence path, or by full quadrature with `oracle`.
pub fn build_table(
    cfg: &RunConfig,
    sys: &RecurrenceSystem,
    spec: &ProblemSpec,
) -> Result<(IntegralTable, KindSummary)> {
    let (kind, n) = (sys.kind, cfg.n);
    if cfg.oracle {
        let t = full_table_quadrature(kind, n, spec, &cfg.quadrature)?;
        let summary = KindSummary {
            kind,
            n,
            provenance: t.table.counts(),
            fallbacks: Vec::new(),
            seed_seconds: 0.0,
            fill_seconds: t.elapsed.as_secs_f64(),
            fallback_seconds: 0.0,
        };
        return Ok((t.table, summary));
    }
    let (seeds, seed_time) = resolve_seeds(&cfg.seeds, sys, n, spec, &cfg.quadrature)?;
    let out = fill_table(sys, &seeds, n, |idx| seed_integral(kind, idx, spec, &cfg.quadrature))?;
    let summary = KindSummary {
        kind,
        n,
        provenance: out.counts,
        fallbacks: out.fallbacks,
        seed_seconds: seed_time.as_secs_f64(),
        fill_seconds: out.recurrence_time.as_secs_f64(),
        fallback_seconds: out.fallback_time.as_secs_f64(),
    };
    Ok((out.table, summary))
}

pub fn build_tables(cfg: &RunConfig) -> Result<BuiltTables> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    let [sa, sb, sc] = cfg.systems()?;
    let (a, ka) = build_table(cfg, &sa, &spec)?;
    let (b, kb) = build_table(cfg, &sb, &spec)?;
    let (c, kc) = build_table(cfg, &sc, &spec)?;
    let summaries = vec![ka, kb, kc];
    let warnings = summaries
        .iter()
        .filter(|s| s.fallback_fraction() > FALLBACK_WARN_FRACTION)
        .map(|s| {
            format!(
                "table {}: {} of {} entries fell back to quadrature",
                s.kind,
                s.provenance.fallback,
                s.provenance.total()
            )
        })
        .collect();
    Ok(BuiltTables {
        tables: [a, b, c],
        summaries,
        warnings,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FillReport {
    pub problem: String,
    pub oracle: bool,
    pub tables: Vec<KindSummary>,
    pub warnings: Vec<String>,
}

pub fn cmd_fill(cfg: &RunConfig) -> Result<FillReport> {
    let built = build_tables(cfg)?;
    std::fs::create_dir_all(&cfg.out)?;
    for t in &built.tables {
        t.write_json(&cfg.table_path(t.kind()))?;
    }
    let report = FillReport {
        problem: cfg.problem.clone(),
        oracle: cfg.oracle,
        tables: built.summaries,
        warnings: built.warnings,
    };
    write_json(&cfg.out.join("fill_summary.json"), &report)?;
    Ok(report)
}

pub fn read_tables(cfg: &RunConfig) -> Result<[IntegralTable; 3]> {
    let read = |kind| {
        let path = cfg.table_path(kind);
        if !path.is_file() {
            return Err(Error::usage(format!("{} not found; run `fill` first", path.display())));
        }
        IntegralTable::read_json(&path)
    };
    let tables = [read(Kind::A)?, read(Kind::B)?, read(Kind::C)?];
    if let Some(t) = tables.iter().find(|t| t.n() != cfg.n) {
        return Err(Error::usage(format!(
            "table {} has N = {}, expected {}",
            t.kind(),
            t.n(),
            cfg.n
        )));
    }
    Ok(tables)
}

/// SGA from the Riccati initial guess on assembled tables.
pub fn solve(tables: &[IntegralTable; 3], eps: f64, l_max: usize) -> Result<SgaResult> {
    let [a, b, c] = tables;
    let sys = GalerkinSystem::assemble(a, b, c)?;
    let mut result = sys.sga_run(&SgaConfig::new(riccati_initial_guess(sys.n()), eps, l_max))?;
    result.tables = tables.iter().map(TableSummary::of).collect();
    Ok(result)
}

pub fn cmd_sga(cfg: &RunConfig) -> Result<SgaResult> {
    cfg.validate()?;
    let tables = read_tables(cfg)?;
    let result = solve(&tables, cfg.eps, cfg.l_max)?;
    write_json(&cfg.result_path(), &result)?;
    let mut w = csv::Writer::from_writer(create_file(&cfg.out.join("residual_history.csv"))?);
    w.write_record(["iteration", "residual"])?;
    w.serialize((0usize, result.initial_residual))?;
    for (l, r) in result.residual_history.iter().enumerate() {
        w.serialize((l + 1, r))?;
    }
    w.flush()?;
    Ok(result)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KindBench {
    pub kind: Kind,
    #[serde(rename = "N")]
    pub n: usize,
    pub entries: usize,
    pub provenance: ProvenanceCounts,
    pub seed_quadrature_seconds: f64,
    /// Best recurrence-fill time over the repeats, seeds and fallbacks excluded.
    pub recurrence_fill_seconds: f64,
    /// Best time to compute every entry by `f64` quadrature.
    pub full_quadrature_seconds: f64,
    /// The same in double-double, as used for the oracle.
    pub full_quadrature_extended_seconds: f64,
    pub ratio: f64,
    pub max_relative_deviation: f64,
    pub max_normalized_deviation: f64,
    pub oracle_failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub problem: String,
    pub repeats: usize,
    pub runs: Vec<KindBench>,
}

impl BenchReport {
    pub fn run(&self, n: usize, kind: Kind) -> Option<&KindBench> {
        self.runs.iter().find(|r| r.n == n && r.kind == kind)
    }

    /// Total recurrence-fill time over full-quadrature time at size `n`.
    pub fn ratio(&self, n: usize) -> Option<f64> {
        let runs: Vec<&KindBench> = self.runs.iter().filter(|r| r.n == n).collect();
        if runs.is_empty() {
            return None;
        }
        let fill: f64 = runs.iter().map(|r| r.recurrence_fill_seconds).sum();
        let quad: f64 = runs.iter().map(|r| r.full_quadrature_seconds).sum();
        Some(fill / quad)
    }
}

fn best_of<T>(repeats: usize, mut f: impl FnMut() -> Result<(T, Duration)>) -> Result<(T, Duration)> {
    // warm-up, not timed
    let (mut keep, _) = f()?;
    let mut best = Duration::MAX;
    for _ in 0..repeats {
        let (v, t) = f()?;
        best = best.min(t);
        keep = v;
    }
    Ok((keep, best))
}

pub fn bench_kind(cfg: &RunConfig, sys: &RecurrenceSystem, spec: &ProblemSpec, n: usize) -> Result<KindBench> {
    let kind = sys.kind;
    let (seeds, seed_time) = resolve_seeds(&cfg.seeds, sys, n, spec, &cfg.quadrature)?;
    let (fill, fill_time) = best_of(cfg.bench_repeats, || {
        let o = fill_table(sys, &seeds, n, |idx| seed_integral(kind, idx, spec, &cfg.quadrature))?;
        let t = o.recurrence_time;
        Ok((o, t))
    })?;
    let plain = QuadraturePolicy {
        precision: crate::integrals::Precision::Double,
        ..cfg.quadrature
    };
    let (_, quad_time) = best_of(cfg.bench_repeats, || {
        let t = full_table_quadrature(kind, n, spec, &plain)?;
        let e = t.elapsed;
        Ok(((), e))
    })?;
    let extended = QuadraturePolicy {
        precision: crate::integrals::Precision::DoubleDouble,
        ..cfg.quadrature
    };
    let oracle = full_table_quadrature(kind, n, spec, &extended)?;
    let agreement = fill.table.compare(&oracle.table, 1e-6, 1e-8)?;
    Ok(KindBench {
        kind,
        n,
        entries: fill.table.len(),
        provenance: fill.counts,
        seed_quadrature_seconds: seed_time.as_secs_f64(),
        recurrence_fill_seconds: fill_time.as_secs_f64(),
        full_quadrature_seconds: quad_time.as_secs_f64(),
        full_quadrature_extended_seconds: oracle.elapsed.as_secs_f64(),
        ratio: fill_time.as_secs_f64() / quad_time.as_secs_f64(),
        max_relative_deviation: agreement.max_relative,
        max_normalized_deviation: agreement.max_normalized,
        oracle_failures: agreement.failures,
    })
}

pub fn cmd_bench(cfg: &RunConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    let systems = cfg.systems()?;
    let mut runs = Vec::new();
    for &n in &cfg.bench_sizes {
        for sys in &systems {
            runs.push(bench_kind(cfg, sys, &spec, n)?);
        }
    }
    let report = BenchReport {
        problem: cfg.problem.clone(),
        repeats: cfg.bench_repeats,
        runs,
    };
    std::fs::create_dir_all(&cfg.out)?;
    write_json(&cfg.out.join("bench.json"), &report)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyReport {
    pub problem: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub families: Vec<AnnihilationReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.families.iter().all(AnnihilationReport::passed)
    }

    pub fn failed_ids(&self) -> Vec<&str> {
        self.families.iter().flat_map(|f| f.failed_ids()).collect()
    }
}

/// Checks every operator, enabled or not, against quadrature tables.
pub fn verify_systems(
    systems: &[RecurrenceSystem],
    spec: &ProblemSpec,
    n: usize,
    policy: &QuadraturePolicy,
) -> Result<VerifyReport> {
    let mut families = Vec::new();
    for sys in systems.iter().filter(|s| !s.operators.is_empty()) {
        let oracle = full_table_quadrature(sys.kind, n, spec, policy)?.table;
        families.push(verify_annihilation(sys, &oracle, VERIFY_TOL)?);
    }
    Ok(VerifyReport {
        problem: spec.label.to_string(),
        n,
        families,
    })
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<VerifyReport> {
    cfg.validate()?;
    let report = verify_systems(&cfg.systems()?, &cfg.spec()?, cfg.n, &cfg.quadrature)?;
    std::fs::create_dir_all(&cfg.out)?;
    write_json(&cfg.out.join("verify.json"), &report)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulateReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub x0: f64,
    pub t_end: f64,
    pub final_state: f64,
    pub running_cost: f64,
    pub files: Vec<PathBuf>,
}

/// Writes the scans, then the trajectory. On divergence the partial
/// trajectory is still written before the error is returned.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulateReport> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    let path = cfg.result_path();
    if !path.is_file() {
        return Err(Error::usage(format!("{} not found; run `sga` first", path.display())));
    }
    let result: SgaResult = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
    let vf = ValueFunction::new(result.v_star);
    let n = vf.n();
    let xs = grid(cfg.scan_range.0, cfg.scan_range.1, cfg.scan_points);
    let value_path = cfg.out.join(format!("value_scan_N{n}.csv"));
    let residual_path = cfg.out.join(format!("residual_scan_N{n}.csv"));
    let traj_path = cfg.out.join("trajectory.csv");
    write_value_scan(&vf, &xs, create_file(&value_path)?)?;
    write_residual_scan(&vf, &spec, &xs, create_file(&residual_path)?)?;
    let traj = match simulate(&vf, &spec, cfg.x0, cfg.t_end, cfg.dt) {
        Ok(t) => t,
        Err(Error::Divergence { t, state, partial }) => {
            partial.write_csv(create_file(&traj_path)?)?;
            return Err(Error::Divergence { t, state, partial });
        }
        Err(e) => return Err(e),
    };
    traj.write_csv(create_file(&traj_path)?)?;
    Ok(SimulateReport {
        n,
        x0: cfg.x0,
        t_end: cfg.t_end,
        final_state: traj.final_state().unwrap_or(cfg.x0),
        running_cost: traj.running_cost(&spec),
        files: vec![value_path, residual_path, traj_path],
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
