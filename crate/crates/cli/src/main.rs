//! Command-line runner: config-driven scenario execution, Monte Carlo
//! ensembles, diagnostics over stored trajectories, manufactured-forcing
//! table emission, and the acceptance suites.
//!
//! Exit codes: 0 success, 2 config/usage error, 3 numeric failure,
//! 4 acceptance failure.

use clap::{Parser, Subcommand};
use pantolab::forcing::{manufactured_phi, ZSpec};
use pantolab::history::{fmt_full, from_csv};
use pantolab::scenario::{run_diagnostics, run_ensemble, run_simulate, RunError, ScenarioConfig};
use pantolab::verify::{run_suite, VerifyError};
use serde::Deserialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pantolab",
    version,
    about = "Numerical laboratory for perturbed pantograph equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario from a JSON config and write trajectory + report.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Seed override (highest priority; PANTOLAB_SEED is lowest).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo ensemble with stream-indexed seeds.
    Ensemble {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (verdicts are scheduling-invariant).
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Run the diagnostics requested in a config against a stored CSV.
    Diagnose {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a registered acceptance suite and print the verdict table.
    Verify {
        /// One of the registered suites.
        suite: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit a manufactured forcing table (t, phi, z) as CSV.
    Construct {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Config for `construct`: a manufactured target plus a log-spaced grid.
#[derive(Debug, Deserialize)]
struct ConstructConfig {
    z: ZSpec,
    a: f64,
    b: f64,
    q: f64,
    t_start: f64,
    t_end: f64,
    points: usize,
}

fn exit_for_run_error(e: &RunError) -> ExitCode {
    match e {
        RunError::Config(_) => ExitCode::from(2),
        _ => ExitCode::from(3),
    }
}

fn load_config(path: &PathBuf) -> Result<ScenarioConfig, ExitCode> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(2)
    })?;
    ScenarioConfig::from_json(&text).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { config, seed, out } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            match run_simulate(&cfg, seed, out.as_deref()) {
                Ok(report) => {
                    match serde_json::to_string_pretty(&report) {
                        Ok(json) => println!("{json}"),
                        Err(e) => {
                            eprintln!("error: report serialization: {e}");
                            return ExitCode::from(3);
                        }
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_for_run_error(&e)
                }
            }
        }
        Command::Ensemble {
            config,
            seed,
            out,
            threads,
        } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            match run_ensemble(&cfg, seed, threads, out.as_deref()) {
                Ok(report) => {
                    println!(
                        "paths {}: to_zero {} to_limit {} bounded {} unbounded {}",
                        report.paths,
                        report.tally.converges_to_zero,
                        report.tally.converges_to_limit,
                        report.tally.bounded_nonconvergent,
                        report.tally.unbounded
                    );
                    if out.is_none() {
                        match serde_json::to_string_pretty(&report) {
                            Ok(json) => println!("{json}"),
                            Err(e) => {
                                eprintln!("error: report serialization: {e}");
                                return ExitCode::from(3);
                            }
                        }
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_for_run_error(&e)
                }
            }
        }
        Command::Diagnose { csv, config } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let text = match std::fs::read_to_string(&csv) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", csv.display());
                    return ExitCode::from(2);
                }
            };
            let sol = match from_csv(&text) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            match run_diagnostics(&cfg, &sol) {
                Ok(results) => {
                    match serde_json::to_string_pretty(&results) {
                        Ok(json) => println!("{json}"),
                        Err(e) => {
                            eprintln!("error: serialization: {e}");
                            return ExitCode::from(3);
                        }
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_for_run_error(&e)
                }
            }
        }
        Command::Verify { suite, seed, out } => match run_suite(&suite, seed) {
            Ok(report) => {
                print!("{}", report.table());
                if let Some(dir) = out {
                    if let Err(e) = std::fs::create_dir_all(&dir) {
                        eprintln!("error: {e}");
                        return ExitCode::from(3);
                    }
                    let path = dir.join(format!("verify_{suite}.json"));
                    match serde_json::to_string_pretty(&report) {
                        Ok(json) => {
                            if let Err(e) = std::fs::write(&path, json) {
                                eprintln!("error: {e}");
                                return ExitCode::from(3);
                            }
                        }
                        Err(e) => {
                            eprintln!("error: serialization: {e}");
                            return ExitCode::from(3);
                        }
                    }
                }
                if report.pass {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(4)
                }
            }
            Err(VerifyError::UnknownSuite { name, available }) => {
                eprintln!(
                    "error: unknown suite {name:?}; available: {}",
                    available.join(", ")
                );
                ExitCode::from(2)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(3)
            }
        },
        Command::Construct { config, out } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            let cfg: ConstructConfig = match serde_json::from_str(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: config parse: {e}");
                    return ExitCode::from(2);
                }
            };
            if !(cfg.t_start > 0.0 && cfg.t_end > cfg.t_start && cfg.points >= 2) {
                eprintln!("error: config error at grid: need 0 < t_start < t_end and points >= 2");
                return ExitCode::from(2);
            }
            let phi = match manufactured_phi(cfg.z.clone(), cfg.a, cfg.b, cfg.q) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let mut csv = String::from("t,phi,z\n");
            for k in 0..cfg.points {
                let t = cfg.t_start
                    * (cfg.t_end / cfg.t_start).powf(k as f64 / (cfg.points - 1) as f64);
                let (p, z) = (phi.eval(t), cfg.z.eval(t, cfg.q));
                if !p.is_finite() || !z.is_finite() {
                    eprintln!("error: non-finite table value at t = {t}");
                    return ExitCode::from(3);
                }
                csv.push_str(&format!(
                    "{},{},{}\n",
                    fmt_full(t),
                    fmt_full(p),
                    fmt_full(z)
                ));
            }
            match out {
                Some(dir) => {
                    if let Err(e) = std::fs::create_dir_all(&dir) {
                        eprintln!("error: {e}");
                        return ExitCode::from(3);
                    }
                    let path = dir.join("manufactured.csv");
                    if let Err(e) = std::fs::write(&path, csv) {
                        eprintln!("error: {e}");
                        return ExitCode::from(3);
                    }
                    println!("wrote {}", path.display());
                }
                None => print!("{csv}"),
            }
            ExitCode::SUCCESS
        }
    }
}
