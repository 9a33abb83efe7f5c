use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spde_density::experiments::{self, exit_code, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "spde-density", version, about = "Density bounds laboratory for additive-noise heat and wave SPDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (results do not depend on it).
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config and print hypothesis warnings.
    Validate { config: PathBuf },
    /// List the experiment catalog.
    ListExperiments,
}

fn load(path: &Path) -> Result<ExperimentConfig, ExitCode> {
    ExperimentConfig::from_path(path).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(exit_code::CONFIG as u8)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => {
            for kind in ExperimentKind::all() {
                println!("{:<24} {}", kind.name(), kind.description());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let resolved = match cfg.resolve() {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("invalid: {e}");
                    return ExitCode::from(exit_code::CONFIG as u8);
                }
            };
            match resolved.diagnostics() {
                Ok(report) => {
                    for w in &report.warnings {
                        eprintln!("warning: {w}");
                    }
                    println!("{}", serde_json::to_string_pretty(&report).unwrap_or_default());
                    println!("valid");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("invalid: {e}");
                    ExitCode::from(exit_code::CONFIG as u8)
                }
            }
        }
        Command::Run { config, seed, jobs, out } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if seed.is_some() {
                cfg.master_seed = seed;
            }
            if jobs.is_some() {
                cfg.jobs = jobs;
            }
            if out.is_some() {
                cfg.output_dir = out;
            }
            let resolved = match cfg.resolve() {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("invalid: {e}");
                    return ExitCode::from(exit_code::CONFIG as u8);
                }
            };
            if let Ok(report) = resolved.diagnostics() {
                for w in &report.warnings {
                    eprintln!("warning: {w}");
                }
            }
            match experiments::run(&resolved) {
                Ok(outcome) => {
                    for c in &outcome.checks {
                        let verdict = match (c.pass, c.diagnostic) {
                            (true, _) => "PASS",
                            (false, false) => "FAIL",
                            (false, true) => "NOTE",
                        };
                        println!("{verdict} {:<28} {}", c.name, c.detail);
                    }
                    println!("outputs written to {}", resolved.output_dir.display());
                    if outcome.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(exit_code::CHECK_FAILED as u8)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(experiments::exit_code_for(&e) as u8)
                }
            }
        }
    }
}
