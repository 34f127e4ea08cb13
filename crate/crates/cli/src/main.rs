//! `hessborn`: check whether a connection–metric pair is Hessian and whether
//! the Born structure it induces on the tangent bundle is integrable.
//!
//! Exit status: 0 when every internal invariant held, 1 for spec or
//! configuration errors (reported as a JSON error object), 2 when a run
//! finished but an internal invariant failed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hessborn::affine_chart::{chart_witness, DEFAULT_STEPS};
use hessborn::report::{run, theorem_report, RunConfig, CHART_PROBES};
use hessborn::sampling::{self, CheckSettings};
use hessborn::spec_file::{builtin_corpus, builtin_names, load_spec, load_spec_file};
use hessborn::ManifoldSpec;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "hessborn", version, about = "Hessian structures and integrable Born structures on tangent bundles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in example specs.
    ListExamples,
    /// Run every verdict on one spec and emit the JSON report.
    Check {
        /// Built-in example name or path to a spec JSON file.
        spec: String,
        #[command(flatten)]
        sampling: SamplingArgs,
        /// Write the report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare the Hessian and integrability verdicts over a corpus.
    Theorem {
        /// `builtin` or a directory of spec JSON files.
        #[arg(long, default_value = "builtin")]
        corpus: String,
        #[command(flatten)]
        sampling: SamplingArgs,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build affine coordinates at a point via the exponential map and check them.
    AffineChart {
        spec: String,
        /// Base point, comma separated.
        #[arg(long)]
        at: String,
        #[arg(long, default_value_t = DEFAULT_STEPS)]
        steps: usize,
        #[arg(long, default_value_t = CHART_PROBES)]
        probes: usize,
        #[arg(long, default_value_t = sampling::DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Args)]
struct SamplingArgs {
    /// Base sample points.
    #[arg(long, default_value_t = sampling::DEFAULT_BASE_POINTS)]
    points: usize,
    /// Fiber vectors per base point.
    #[arg(long, default_value_t = sampling::DEFAULT_FIBER_POINTS)]
    fiber_points: usize,
    #[arg(long, default_value_t = sampling::DEFAULT_FIBER_RADIUS)]
    fiber_radius: f64,
    /// Threshold for "vanishes".
    #[arg(long, default_value_t = sampling::DEFAULT_TOL)]
    tol: f64,
    /// Threshold for cross-pipeline implications.
    #[arg(long, default_value_t = sampling::DEFAULT_CROSS_TOL)]
    cross_tol: f64,
    #[arg(long, default_value_t = sampling::DEFAULT_SEED)]
    seed: u64,
}

impl SamplingArgs {
    fn settings(&self) -> CheckSettings {
        CheckSettings {
            points: self.points,
            fiber_points: self.fiber_points,
            fiber_radius: self.fiber_radius,
            tol: self.tol,
            cross_tol: self.cross_tol,
            seed: self.seed,
        }
    }
}

#[derive(Serialize)]
struct ErrorObject {
    error: ErrorBody,
}

#[derive(Serialize)]
struct ErrorBody {
    message: String,
    causes: Vec<String>,
}

fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_corpus(source: &str) -> Result<Vec<ManifoldSpec>> {
    if source == "builtin" {
        return Ok(builtin_corpus());
    }
    let dir = Path::new(source);
    if !dir.is_dir() {
        bail!("corpus {source:?} is neither \"builtin\" nor a directory");
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .json spec files in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| load_spec_file(p).with_context(|| format!("loading {}", p.display())))
        .collect()
}

fn parse_point(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("invalid coordinate {s:?} in --at"))
        })
        .collect()
}

/// Runs the command; `Ok(false)` means an internal invariant failed.
fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::ListExamples => {
            for name in builtin_names() {
                let spec = load_spec(name)?;
                println!("{name}\t{}", spec.connection().kind_name());
            }
            Ok(true)
        }
        Command::Check { spec, sampling, report } => {
            let spec = load_spec(&spec)?;
            let config = RunConfig {
                settings: sampling.settings(),
                ..RunConfig::default()
            };
            let result = run(&spec, &config)?;
            emit(&result, report.as_deref())?;
            for failure in &result.status.failures {
                eprintln!("invariant failure: {failure}");
            }
            Ok(result.status.ok)
        }
        Command::Theorem { corpus, sampling, report } => {
            let specs = load_corpus(&corpus)?;
            let result = theorem_report(&specs, &sampling.settings())?;
            emit(&result, report.as_deref())?;
            for failure in &result.status.failures {
                eprintln!("invariant failure: {failure}");
            }
            Ok(result.status.ok)
        }
        Command::AffineChart { spec, at, steps, probes, seed } => {
            let spec = load_spec(&spec)?;
            let x0 = parse_point(&at)?;
            if x0.len() != spec.dimension() {
                bail!("--at has {} coordinates but the spec has dimension {}", x0.len(), spec.dimension());
            }
            let witness = chart_witness(&spec, &x0, steps, probes, seed)?;
            emit(&witness, None)?;
            Ok(witness.passed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(err) => {
            let body = ErrorObject {
                error: ErrorBody {
                    message: err.to_string(),
                    causes: err.chain().skip(1).map(|c| c.to_string()).collect(),
                },
            };
            println!("{}", serde_json::to_string_pretty(&body).expect("error object serializes"));
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
