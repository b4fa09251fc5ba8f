use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sga_core::cli::{self, RunConfig, SeedSource};
use sga_core::integrals::{Precision, QuadraturePolicy};
use sga_core::Error;

#[derive(Parser)]
#[command(
    name = "sga",
    version,
    about = "Successive Galerkin approximation with recurrence-filled integrals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the a, b and c tables
    Fill(Opts),
    /// Run SGA on tables written by `fill`
    Sga(Opts),
    /// Time recurrence fill against full quadrature
    Bench(Opts),
    /// Check operators against quadrature tables
    Verify(Opts),
    /// Write value and residual scans and the closed-loop trajectory
    Simulate(Opts),
}

#[derive(Args)]
struct Opts {
    #[arg(long, default_value = "sin-system")]
    problem: String,
    /// Basis size; defaults to 10 (8 for `verify`)
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1e-9)]
    eps: f64,
    #[arg(long, default_value_t = 50)]
    lmax: usize,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 10.0)]
    tend: f64,
    #[arg(long, default_value_t = 4.0, allow_negative_numbers = true)]
    x0: f64,
    /// Operator file; the shipped operators for the problem by default
    #[arg(long)]
    ops: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Compute every entry by quadrature
    #[arg(long)]
    oracle: bool,
    /// Seed file, or `auto`
    #[arg(long, default_value = "auto")]
    seeds: String,
    /// Operator ids to leave out, comma separated
    #[arg(long, value_delimiter = ',')]
    exclude: Vec<String>,
    /// Sizes for `bench`
    #[arg(long, value_delimiter = ',', default_values_t = [10, 15])]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Evaluate quadrature in plain f64 instead of double-double
    #[arg(long)]
    plain_quadrature: bool,
}

impl Opts {
    fn config(self, default_n: usize) -> Result<RunConfig, Error> {
        let precision = if self.plain_quadrature {
            Precision::Double
        } else {
            Precision::DoubleDouble
        };
        Ok(RunConfig {
            problem: self.problem,
            n: self.n.unwrap_or(default_n),
            quadrature: QuadraturePolicy {
                precision,
                ..QuadraturePolicy::default()
            },
            eps: self.eps,
            l_max: self.lmax,
            dt: self.dt,
            t_end: self.tend,
            x0: self.x0,
            ops: self.ops,
            out: self.out,
            oracle: self.oracle,
            seeds: self.seeds.parse::<SeedSource>()?,
            exclude: self.exclude,
            bench_sizes: self.sizes,
            bench_repeats: self.repeats,
            ..RunConfig::default()
        })
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(command: Command) -> Result<i32, Error> {
    match command {
        Command::Fill(o) => {
            let report = cli::cmd_fill(&o.config(10)?)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            print_json(&report)?;
        }
        Command::Sga(o) => {
            let result = cli::cmd_sga(&o.config(10)?)?;
            if !result.converged {
                eprintln!("warning: not converged after {} iterations", result.iterations);
            }
            print_json(&result)?;
        }
        Command::Bench(o) => {
            let report = cli::cmd_bench(&o.config(10)?)?;
            for r in &report.runs {
                println!(
                    "N={:<3} {}  fill {:>10.3e} s  quadrature {:>10.3e} s  ratio {:.3}  max rel dev {:.1e}",
                    r.n,
                    r.kind,
                    r.recurrence_fill_seconds,
                    r.full_quadrature_seconds,
                    r.ratio,
                    r.max_relative_deviation
                );
            }
            let mut sizes: Vec<usize> = report.runs.iter().map(|r| r.n).collect();
            sizes.dedup();
            for n in sizes {
                println!("N={n:<3} total ratio {:.3}", report.ratio(n).unwrap_or(f64::NAN));
            }
        }
        Command::Verify(o) => {
            let report = cli::cmd_verify(&o.config(8)?)?;
            for fam in &report.families {
                for op in &fam.operators {
                    println!(
                        "{:<8} {:<4} checked {:>5}  max residual {:.2e}  {}",
                        op.id,
                        fam.kind,
                        op.checked,
                        op.max_residual,
                        if op.passed { "ok" } else { "FAIL" }
                    );
                }
            }
            if !report.passed() {
                eprintln!("operators failing verification: {}", report.failed_ids().join(", "));
                return Ok(cli::EXIT_VERIFY);
            }
        }
        Command::Simulate(o) => {
            let report = cli::cmd_simulate(&o.config(10)?)?;
            print_json(&report)?;
        }
    }
    Ok(cli::EXIT_OK)
}

fn main() -> ExitCode {
    let args = Cli::parse();
    match run(args.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
