use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use nsac1d::config::{load_config, RunConfig};
use nsac1d::diagnostics::OrderVerdict;
use nsac1d::driver::{
    execute_check, execute_convergence, execute_run, DriverError, RunStatus,
};

const EXIT_SOLVER_FAILURE: u8 = 1;
const EXIT_BOUND_VIOLATION: u8 = 2;
const EXIT_USAGE: u8 = 64;

/// 1-D compressible Navier-Stokes/Allen-Cahn solver in Lagrangian mass
/// coordinates with a built-in conservation and entropy-balance verifier.
#[derive(Parser)]
#[command(name = "nsac1d", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate, writing snapshots and a summary report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Stop at the first bound violation and exit 2.
        #[arg(long)]
        fail_fast: bool,
        /// Seed override for randomized initial data.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Self-convergence study over three nested grids.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated grid sizes, e.g. 128,256,512 (each doubling).
        #[arg(long)]
        grids: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Validate and normalize the configured initial data, then exit.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
}

fn apply_overrides(
    cfg: &mut RunConfig,
    out: Option<PathBuf>,
    fail_fast: bool,
    seed: Option<u64>,
) {
    if let Some(out) = out {
        cfg.out_dir = Some(out);
    }
    if fail_fast {
        cfg.fail_fast = true;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
}

fn run_command(cmd: Command) -> ExitCode {
    match cmd {
        Command::Run {
            config,
            out,
            fail_fast,
            seed,
        } => {
            let mut cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => return usage_error(&e.to_string()),
            };
            apply_overrides(&mut cfg, out, fail_fast, seed);
            match execute_run(&cfg) {
                Ok(output) => {
                    let r = &output.report;
                    println!("run: {} steps to t = {}", r.steps, r.final_record.time);
                    println!("  out dir             : {}", output.out_dir.display());
                    println!("  wall clock          : {:.3} s", r.wall_clock_seconds);
                    println!("  max |mass drift|    : {:e}", r.max_mass_drift);
                    println!("  max rel energy drift: {:e}", r.max_energy_drift_rel);
                    println!("  max entropy residual: {:e}", r.max_entropy_residual);
                    if let Some(rec) = r.max_reconstruction_error {
                        println!("  max recon Linf      : {rec:e}");
                    }
                    println!("  bound violations    : {}", r.violation_count);
                    match output.status {
                        RunStatus::Clean => ExitCode::SUCCESS,
                        RunStatus::BoundViolation => {
                            for v in &r.violations {
                                eprintln!(
                                    "violation at t = {}: {} (index {:?}, value {})",
                                    v.time, v.check, v.index, v.value
                                );
                            }
                            ExitCode::from(EXIT_BOUND_VIOLATION)
                        }
                        RunStatus::SolverFailure(msg) => {
                            eprintln!("solver failure: {msg}");
                            ExitCode::from(EXIT_SOLVER_FAILURE)
                        }
                    }
                }
                Err(e) => driver_error(e),
            }
        }
        Command::Convergence {
            config,
            grids,
            seed,
        } => {
            let mut cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => return usage_error(&e.to_string()),
            };
            apply_overrides(&mut cfg, None, false, seed);
            let parsed: Vec<usize> = grids
                .split(',')
                .filter_map(|s| s.trim().parse().ok())
                .collect();
            let [a, b, c] = match <[usize; 3]>::try_from(parsed) {
                Ok(v) => v,
                Err(_) => return usage_error("--grids expects three sizes, e.g. 128,256,512"),
            };
            match execute_convergence(&cfg, [a, b, c]) {
                Ok(report) => {
                    println!("self-convergence on grids {a}/{b}/{c} (L1, final time):");
                    println!("{:>8} {:>14} {:>14} {:>10}", "field", "err coarse", "err fine", "order");
                    for f in &report.fields {
                        let order = match f.verdict {
                            OrderVerdict::Order(p) => format!("{p:.2}"),
                            OrderVerdict::ExactlyPreserved => "exact".to_string(),
                            OrderVerdict::Indeterminate => "indet".to_string(),
                        };
                        println!(
                            "{:>8} {:>14.6e} {:>14.6e} {:>10}",
                            f.field, f.err_coarse, f.err_fine, order
                        );
                    }
                    if report.all_orders_at_least(1.0) {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!("convergence below order 1");
                        ExitCode::from(EXIT_SOLVER_FAILURE)
                    }
                }
                Err(e) => driver_error(e),
            }
        }
        Command::Check { config } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => return usage_error(&e.to_string()),
            };
            match execute_check(&cfg) {
                Ok(out) => {
                    print!("{}", out.validation);
                    if out.validation.ok() {
                        println!("raw mass          : {}", out.raw_mass.unwrap());
                        println!("normalized energy : {}", out.normalized_energy.unwrap());
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_BOUND_VIOLATION)
                    }
                }
                Err(e) => driver_error(e),
            }
        }
    }
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("nsac1d: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn driver_error(e: DriverError) -> ExitCode {
    match e {
        DriverError::InvalidInitialData(report) => {
            eprint!("{report}");
            ExitCode::from(EXIT_BOUND_VIOLATION)
        }
        DriverError::Config(e) => usage_error(&e.to_string()),
        DriverError::Fault(e) => {
            eprintln!("nsac1d: {e}");
            ExitCode::from(EXIT_SOLVER_FAILURE)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    run_command(cli.command)
}
