use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nekhoro_core::dynamics::{integrate, IntegratorConfig, RunManifest, State, Trajectory};
use nekhoro_core::frequency_geometry::{detect_crossings, events_to_json_lines};
use nekhoro_core::harness::{emit_outputs, fit_confinement, run_scan, ScanConfig};
use nekhoro_core::model::SystemSpec;
use nekhoro_core::planner::{analytic_exponents, gevrey_exponents, Exact, PlannerConstants};
use nekhoro_core::resonance_lattice::{
    module_constants, rational_in_interval, smith_normal_form, unimodular_completion, IntMatrix, IntegerVector,
};
use nekhoro_core::{Error, Result};

#[derive(Parser)]
#[command(name = "nekhoro", version, about = "Resonance lattices, frequency geometry and stability scans for near-integrable Hamiltonians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact integer lattice operations.
    Lattice {
        #[command(subcommand)]
        op: LatticeOp,
    },
    /// Resonance crossings along a trajectory CSV, as JSON lines.
    Detect {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long = "K")]
        order: i64,
        /// System whose frequency map is applied to the actions; ω = I without it.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Integrate one trajectory and write it as CSV plus a manifest.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        t_max: f64,
        #[arg(long)]
        out: PathBuf,
        /// Initial angles, comma separated (default 0).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        theta0: Option<Vec<f64>>,
        /// Initial actions, comma separated (default 0).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        i0: Option<Vec<f64>>,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Run an ε-grid scan and write scan.csv, summary.json, drift_vs_eps.svg and manifest.json.
    Scan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exponent and threshold planning in exact rationals.
    Plan {
        #[command(subcommand)]
        regime: PlanRegime,
    },
}

#[derive(Subcommand)]
enum LatticeOp {
    /// Unimodular completion of a primitive vector.
    Complete {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        k: Vec<i64>,
        #[arg(long = "K")]
        order: Option<i64>,
    },
    /// Smith normal form of a whitespace-separated integer matrix file.
    Snf {
        #[arg(long)]
        matrix_file: PathBuf,
    },
    /// Short fraction p/q in [x − l/2, x + l/2].
    Rational {
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long)]
        l: f64,
    },
}

#[derive(Subcommand)]
enum PlanRegime {
    Analytic {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        gamma: Exact,
        /// Also evaluate the smallness thresholds at this ε.
        #[arg(long)]
        eps: Option<f64>,
    },
    Gevrey {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        alpha: Exact,
        #[arg(long)]
        gamma: Exact,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Lattice { op } => lattice(op),
        Command::Detect { traj, order, spec } => {
            let trajectory = Trajectory::read_csv(fs::File::open(&traj)?)?;
            let samples = match spec {
                Some(path) => trajectory.frequency_samples(&read_spec(&path)?),
                None => trajectory.samples.iter().map(|s| (s.t, s.action.clone())).collect(),
            };
            print!("{}", events_to_json_lines(&detect_crossings(&samples, order)?)?);
            Ok(())
        }
        Command::Simulate { spec, t_max, out, theta0, i0, step, stride } => {
            let spec = read_spec(&spec)?;
            let n = spec.dim();
            let initial = State::new(theta0.unwrap_or_else(|| vec![0.0; n]), i0.unwrap_or_else(|| vec![0.0; n]), 0.0)?;
            let mut config = IntegratorConfig::default();
            if let Some(h) = step {
                config.step = h;
            }
            if let Some(s) = stride {
                config.sample_stride = s;
            }
            let (trajectory, failure) = match integrate(&spec, &initial, t_max, &config) {
                Ok(t) => (t, None),
                Err(Error::IntegrationFailure { t, reason, partial }) => {
                    (*partial, Some(Error::IntegrationFailure { t, reason, partial: Box::default() }))
                }
                Err(e) => return Err(e),
            };
            write_trajectory(&trajectory, &out)?;
            let manifest = RunManifest::new(&spec, &config, &initial, t_max)?;
            fs::write(manifest_path(&out), serde_json::to_string_pretty(&manifest)? + "\n")?;
            if let Some(e) = failure {
                return Err(e);
            }
            print_json(&serde_json::json!({
                "samples": trajectory.samples.len(),
                "exit": trajectory.exit,
                "stats": trajectory.stats,
            }))
        }
        Command::Scan { config, out } => {
            let config: ScanConfig = serde_json::from_str(&fs::read_to_string(&config)?)?;
            let result = run_scan(&config)?;
            let paths = emit_outputs(&result, &out)?;
            let fit = fit_confinement(&result).ok();
            print_json(&serde_json::json!({
                "cells": result.records.len(),
                "median_drift": result.median_drifts(),
                "fit": fit,
                "outputs": paths,
            }))
        }
        Command::Plan { regime } => match regime {
            PlanRegime::Analytic { n, gamma, eps } => {
                let plan = analytic_exponents(n, &gamma)?;
                let plan = match eps {
                    Some(eps) => plan.with_thresholds(eps, PlannerConstants::default())?,
                    None => plan,
                };
                print_json(&plan)
            }
            PlanRegime::Gevrey { n, alpha, gamma } => print_json(&gevrey_exponents(n, &alpha, &gamma)?),
        },
    }
}

fn lattice(op: LatticeOp) -> Result<()> {
    match op {
        LatticeOp::Complete { k, order } => {
            let k = IntegerVector::new(k)?;
            let order = match order {
                Some(o) => o,
                None => k.l1_norm()?,
            };
            let completion = unimodular_completion(&k, order)?;
            let constants = module_constants(&k, order)?;
            print_json(&serde_json::json!({
                "k": k,
                "K": order,
                "completion": completion,
                "constants": constants,
            }))
        }
        LatticeOp::Snf { matrix_file } => {
            let m = IntMatrix::parse_text(&fs::read_to_string(&matrix_file)?)?;
            print_json(&smith_normal_form(&m)?)
        }
        LatticeOp::Rational { x, l } => {
            let (p, q) = rational_in_interval(x, l)?;
            print_json(&serde_json::json!({ "x": x, "l": l, "p": p, "q": q }))
        }
    }
}

fn read_spec(path: &Path) -> Result<SystemSpec> {
    SystemSpec::from_json(&fs::read_to_string(path)?)
}

fn write_trajectory(trajectory: &Trajectory, out: &Path) -> Result<()> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    trajectory.write_csv(fs::File::create(out)?)
}

/// traj.csv → traj.manifest.json
fn manifest_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "trajectory".into());
    out.with_file_name(format!("{stem}.manifest.json"))
}
