//! Orchestration of the CLI subcommands: build and validate the initial
//! state, wire the bound monitors and snapshot writers into the integrator,
//! assemble the summary report, and drive convergence studies.

use std::path::PathBuf;
use std::time::Instant;

use crate::config::{ConfigError, RunConfig};
use crate::diagnostics::{
    self, BoundBracket, BoundViolation, ConvergenceReport, DiagnosticsRecord, MonitorConfig,
    RunningIntegrals,
};
use crate::error::Error;
use crate::initial::{builtin_initial_condition, normalize_energy};
use crate::integrator::{
    run, Observer, ObserverControl, RunFailure, StateRetention, StepConfig, Trajectory,
};
use crate::report::{
    read_snapshot, write_report, write_snapshot, ReportSeries, SummaryReport,
};
use crate::state::{
    make_grid, normalize_initial_data, validate_initial_data, Grid, Params, State,
    ValidationReport,
};

#[derive(Debug)]
pub enum DriverError {
    /// The initial data violates the well-posedness hypotheses.
    InvalidInitialData(ValidationReport),
    Config(ConfigError),
    Fault(Error),
}

impl std::fmt::Display for DriverError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DriverError::InvalidInitialData(r) => write!(f, "{r}"),
            DriverError::Config(e) => write!(f, "{e}"),
            DriverError::Fault(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for DriverError {}

impl From<Error> for DriverError {
    fn from(e: Error) -> Self {
        DriverError::Fault(e)
    }
}

impl From<ConfigError> for DriverError {
    fn from(e: ConfigError) -> Self {
        DriverError::Config(e)
    }
}

/// How a completed `run` subcommand should exit.
#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Clean,
    /// Bound violations under fail-fast.
    BoundViolation,
    SolverFailure(String),
}

#[derive(Debug)]
pub struct RunOutput {
    pub report: SummaryReport,
    pub status: RunStatus,
    pub out_dir: PathBuf,
}

struct Prepared {
    grid: Grid,
    params: Params,
    step_cfg: StepConfig,
    state: State,
    bracket: Option<BoundBracket>,
    monitor: MonitorConfig,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared, DriverError> {
    let grid = make_grid(cfg.n_cells)?;
    let params = cfg.params();
    params.validate()?;
    let step_cfg = cfg.step_config();
    step_cfg.validate()?;

    let raw = match cfg.initial_condition()? {
        Some(ic) => builtin_initial_condition(ic, &grid, &params)?,
        None => {
            let path = cfg.ic_file.as_ref().expect("validated: ic_file present");
            let mut s = read_snapshot(path)?;
            if s.n_cells() != grid.n_cells {
                return Err(Error::ShapeMismatch {
                    what: "ic_file cells",
                    expected: grid.n_cells,
                    got: s.n_cells(),
                }
                .into());
            }
            s.time = 0.0;
            s
        }
    };

    let validation = validate_initial_data(&raw, &params);
    if !validation.ok() {
        return Err(DriverError::InvalidInitialData(validation));
    }
    let mut state = normalize_initial_data(&raw, &params, &grid)?.state;
    if cfg.normalize_energy {
        state = normalize_energy(&state, &params, &grid)?;
    }

    let energy0 = diagnostics::conserved_quantities(&state, &params, &grid)?.energy;
    let f0 = diagnostics::entropy_functional(&state, &params, &grid)?;
    // The bracket argument generalizes F(0) by 1/c_v (identical under the
    // reference constants); the upper end of the mean-temperature bracket is
    // 1 only under the energy normalization, otherwise the run's own initial
    // energy budget.
    let bracket = diagnostics::temperature_bracket(f0 / params.c_v).ok();
    // The bracket's upper end 1 is an artifact of the reference energy
    // normalization, so the mean-temperature check arms only there. Without
    // it the only discrete upper bound is E(t)/c_v, which holds identically.
    let energy_normalized = (energy0 - 1.0).abs() <= 1e-9;
    let monitor = MonitorConfig {
        tol_phi: cfg.tol_phi,
        mean_theta_tol: cfg.mean_theta_tol,
        mean_theta_upper: energy_normalized.then_some(1.0),
    };
    Ok(Prepared {
        grid,
        params,
        step_cfg,
        state,
        bracket,
        monitor,
    })
}

struct MonitorObserver {
    bracket: Option<BoundBracket>,
    cfg: MonitorConfig,
    fail_fast: bool,
    violations: Vec<BoundViolation>,
}

impl Observer for MonitorObserver {
    fn on_step(
        &mut self,
        _state: &State,
        _dt_used: f64,
        _integrals: &RunningIntegrals,
        record: &DiagnosticsRecord,
    ) -> crate::error::Result<ObserverControl> {
        let found = diagnostics::monitor_bounds(record, self.bracket.as_ref(), &self.cfg);
        let any = !found.is_empty();
        self.violations.extend(found);
        if any && self.fail_fast {
            Ok(ObserverControl::Halt)
        } else {
            Ok(ObserverControl::Continue)
        }
    }
}

struct SnapshotObserver {
    every: usize,
    steps: usize,
    out_dir: PathBuf,
    grid: Grid,
    params: Params,
}

impl Observer for SnapshotObserver {
    fn on_step(
        &mut self,
        state: &State,
        _dt_used: f64,
        _integrals: &RunningIntegrals,
        _record: &DiagnosticsRecord,
    ) -> crate::error::Result<ObserverControl> {
        self.steps += 1;
        if self.steps % self.every == 0 {
            let path = self.out_dir.join(format!("snapshot_{:06}.tsv", self.steps));
            write_snapshot(state, &self.params, &self.grid, &path)?;
        }
        Ok(ObserverControl::Continue)
    }
}

fn summarize(
    trajectory: &Trajectory,
    violations: Vec<BoundViolation>,
    wall_clock_seconds: f64,
) -> SummaryReport {
    let records = &trajectory.records;
    let r0 = &records[0];
    let fold_max = |f: &dyn Fn(&DiagnosticsRecord) -> f64| {
        records.iter().map(f).fold(0.0f64, f64::max)
    };
    let max_mass_drift = fold_max(&|r| (r.mass - r0.mass).abs());
    let max_energy_drift_rel = fold_max(&|r| (r.energy - r0.energy).abs()) / r0.energy.abs();
    let max_entropy_residual = fold_max(&|r| (r.entropy_f + r.int_v_ds - r0.entropy_f).abs());
    let max_reconstruction_error = records
        .iter()
        .map(|r| r.recon_linf)
        .try_fold(0.0f64, |acc, x| x.map(|v| acc.max(v)));

    SummaryReport {
        steps: trajectory.steps,
        completed: trajectory.completed,
        total_halvings: trajectory.total_halvings,
        dt_min_used: if trajectory.steps == 0 {
            0.0
        } else {
            trajectory.dt_min_used
        },
        dt_max_used: trajectory.dt_max_used,
        dt_mean: trajectory.dt_mean(),
        max_mass_drift,
        max_energy_drift_rel,
        max_entropy_residual,
        max_reconstruction_error,
        violation_count: violations.len(),
        violations,
        wall_clock_seconds,
        final_record: records.last().expect("at least the initial record").clone(),
        series: ReportSeries::from_records(records),
    }
}

/// Simulate per the config: snapshots and a report land in the output
/// directory; the status captures the exit-code contract.
pub fn execute_run(cfg: &RunConfig) -> Result<RunOutput, DriverError> {
    let prepared = prepare(cfg)?;
    let out_dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out_dir).map_err(|source| Error::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    write_snapshot(
        &prepared.state,
        &prepared.params,
        &prepared.grid,
        &out_dir.join("snapshot_000000.tsv"),
    )?;

    let mut monitor = MonitorObserver {
        bracket: prepared.bracket,
        cfg: prepared.monitor,
        fail_fast: cfg.fail_fast,
        violations: Vec::new(),
    };
    let mut snapshots = cfg.snapshot_every_steps.map(|every| SnapshotObserver {
        every,
        steps: 0,
        out_dir: out_dir.clone(),
        grid: prepared.grid.clone(),
        params: prepared.params,
    });

    let started = Instant::now();
    let outcome = {
        let mut observers: Vec<&mut dyn Observer> = vec![&mut monitor];
        if let Some(s) = snapshots.as_mut() {
            observers.push(s);
        }
        run(
            &prepared.state,
            &prepared.params,
            &prepared.step_cfg,
            &prepared.grid,
            cfg.t_end,
            &mut observers,
            StateRetention::FinalOnly,
        )
    };
    let wall_clock_seconds = started.elapsed().as_secs_f64();

    let (trajectory, status) = match outcome {
        Ok(traj) => {
            let status = if cfg.fail_fast && !monitor.violations.is_empty() {
                RunStatus::BoundViolation
            } else {
                RunStatus::Clean
            };
            (traj, status)
        }
        Err(RunFailure {
            error: error @ Error::Io { .. },
            ..
        }) => return Err(error.into()),
        Err(RunFailure {
            error,
            partial: Some(partial),
        }) => (*partial, RunStatus::SolverFailure(error.to_string())),
        Err(RunFailure {
            error,
            partial: None,
        }) => return Err(error.into()),
    };

    // The initial record is monitored too; observers only see accepted steps.
    let mut violations =
        diagnostics::monitor_bounds(&trajectory.records[0], prepared.bracket.as_ref(), &monitor.cfg);
    violations.extend(std::mem::take(&mut monitor.violations));

    write_snapshot(
        trajectory.final_state(),
        &prepared.params,
        &prepared.grid,
        &out_dir.join("snapshot_final.tsv"),
    )?;
    let report = summarize(&trajectory, violations, wall_clock_seconds);
    write_report(&report, &out_dir.join("report.toml"))?;
    Ok(RunOutput {
        report,
        status,
        out_dir,
    })
}

pub struct CheckOutput {
    pub validation: ValidationReport,
    /// Mass before normalization and energy after, when the data is valid.
    pub raw_mass: Option<f64>,
    pub normalized_energy: Option<f64>,
}

/// Validate and normalize the configured initial data without running.
pub fn execute_check(cfg: &RunConfig) -> Result<CheckOutput, DriverError> {
    let grid = make_grid(cfg.n_cells)?;
    let params = cfg.params();
    params.validate()?;
    let raw = match cfg.initial_condition()? {
        Some(ic) => builtin_initial_condition(ic, &grid, &params)?,
        None => read_snapshot(cfg.ic_file.as_ref().expect("validated"))?,
    };
    let validation = validate_initial_data(&raw, &params);
    if !validation.ok() {
        return Ok(CheckOutput {
            validation,
            raw_mass: None,
            normalized_energy: None,
        });
    }
    let raw_mass = crate::state::integrate(&raw.v, &grid)?;
    let normalized = normalize_initial_data(&raw, &params, &grid)?;
    Ok(CheckOutput {
        validation,
        raw_mass: Some(raw_mass),
        normalized_energy: Some(normalized.total_energy),
    })
}

/// Run the same problem on three nested grids and measure self-convergence
/// orders of the final fields.
pub fn execute_convergence(
    cfg: &RunConfig,
    grids: [usize; 3],
) -> Result<ConvergenceReport, DriverError> {
    let mut finals = Vec::new();
    for n in grids {
        let mut level_cfg = cfg.clone();
        level_cfg.n_cells = n;
        let prepared = prepare(&level_cfg)?;
        let traj = run(
            &prepared.state,
            &prepared.params,
            &prepared.step_cfg,
            &prepared.grid,
            cfg.t_end,
            &mut [],
            StateRetention::FinalOnly,
        )
        .map_err(|f| DriverError::Fault(f.error))?;
        finals.push(traj.final_state().clone());
    }
    diagnostics::self_convergence(&finals[0], &finals[1], &finals[2]).map_err(Into::into)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn base_config(out: &std::path::Path) -> RunConfig {
        let mut cfg = parse_config(
            r#"
n_cells = 64
epsilon = 0.1
beta = 1.0
t_end = 0.02
ic = "equilibrium"
"#,
        )
        .unwrap();
        cfg.out_dir = Some(out.to_path_buf());
        cfg
    }

    #[test]
    fn equilibrium_run_is_clean() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = base_config(dir.path());
        let out = execute_run(&cfg).unwrap();
        assert_eq!(out.status, RunStatus::Clean);
        assert_eq!(out.report.violation_count, 0);
        assert_eq!(out.report.max_mass_drift, 0.0);
        assert_eq!(out.report.max_energy_drift_rel, 0.0);
        assert!(out.out_dir.join("report.toml").is_file());
        assert!(out.out_dir.join("snapshot_000000.tsv").is_file());
        assert!(out.out_dir.join("snapshot_final.tsv").is_file());
    }

    #[test]
    fn snapshot_cadence_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = base_config(dir.path());
        cfg.snapshot_every_steps = Some(3);
        let out = execute_run(&cfg).unwrap();
        assert!(out.report.steps >= 3);
        assert!(out.out_dir.join("snapshot_000003.tsv").is_file());
    }

    #[test]
    fn check_reports_mass_and_energy() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = base_config(dir.path());
        let out = execute_check(&cfg).unwrap();
        assert!(out.validation.ok());
        assert_eq!(out.raw_mass, Some(1.0));
        assert_eq!(out.normalized_energy, Some(1.0));
    }

    #[test]
    fn invalid_ic_file_data_is_reported() {
        // A snapshot with phi outside [-1, 1] must fail the check.
        let dir = tempfile::tempdir().unwrap();
        let grid = make_grid(8).unwrap();
        let params = Params::new(0.1, 1.0).unwrap();
        let mut s = State {
            time: 0.0,
            v: vec![1.0; 8],
            u: vec![0.0; 9],
            theta: vec![1.0; 8],
            phi: vec![1.0; 8],
        };
        s.phi[4] = 1.5;
        let snap = dir.path().join("bad_ic.tsv");
        write_snapshot(&s, &params, &grid, &snap).unwrap();

        let mut cfg = base_config(dir.path());
        cfg.n_cells = 8;
        cfg.ic = None;
        cfg.ic_file = Some(snap);
        let out = execute_check(&cfg).unwrap();
        assert!(!out.validation.ok());
        assert_eq!(out.validation.violations[0].check, "phi0 in [-1,1]");
        assert_eq!(out.validation.violations[0].index, 4);

        let err = execute_run(&cfg).unwrap_err();
        assert!(matches!(err, DriverError::InvalidInitialData(_)));
    }

    #[test]
    fn convergence_exact_on_equilibrium() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = base_config(dir.path());
        let report = execute_convergence(&cfg, [16, 32, 64]).unwrap();
        assert!(report.all_orders_at_least(1.0));
    }
}
