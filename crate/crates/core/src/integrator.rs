//! Implicit-explicit time integration of the coupled system.
//!
//! Each step advances momentum, mass, phase and heat in sequence. The three
//! stiff diffusion operators (viscosity, phase diffusion, degenerate heat
//! conduction) are treated implicitly via tridiagonal solves; advection and
//! reaction terms are explicit or semi-implicit. All solves are formulated in
//! delta form (solve for the increment, with the explicit residual on the
//! right-hand side), so a state whose residual vanishes identically is a
//! bitwise fixed point of the step.

use crate::diagnostics::{DiagnosticsRecord, RunningIntegrals};
use crate::error::{Error, Result};
use crate::kernels::{capillary_stress, chemical_potential, pressure, velocity_divergence};
use crate::state::{Grid, Params, State};
use crate::tridiag::Tridiagonal;

/// Time-stepping controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    /// Upper cap on the step size (also the first step's candidate).
    pub dt_init: f64,
    /// Safety factor on the advective and reaction step-size bounds.
    pub cfl_safety: f64,
    /// Relative residual tolerance of the nonlinear heat solve.
    pub picard_tol: f64,
    /// Iteration cap of the nonlinear heat solve.
    pub picard_max_iter: usize,
    /// Smallest allowed step before the integrator fails hard.
    pub dt_min: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            dt_init: 1.0,
            cfl_safety: 0.4,
            picard_tol: 1e-10,
            picard_max_iter: 50,
            dt_min: 1e-12,
        }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_init > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt_init",
                value: self.dt_init,
                constraint: "must be > 0",
            });
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "cfl_safety",
                value: self.cfl_safety,
                constraint: "must be in (0, 1]",
            });
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "picard_tol",
                value: self.picard_tol,
                constraint: "must be > 0",
            });
        }
        if self.picard_max_iter == 0 {
            return Err(Error::InvalidParameter {
                name: "picard_max_iter",
                value: 0.0,
                constraint: "must be >= 1",
            });
        }
        if !(self.dt_min > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt_min",
                value: self.dt_min,
                constraint: "must be > 0",
            });
        }
        Ok(())
    }
}

/// Result of one accepted step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: State,
    pub dt_used: f64,
    pub picard_iters: usize,
    pub halvings: usize,
}

/// Reasons a step attempt is rejected and retried at half the step size.
#[derive(Debug, Clone)]
enum StepProblem {
    NegativeVolume { index: usize, value: f64 },
    NegativeTemperature { index: usize, value: f64 },
    PicardNoConvergence { residual: f64 },
    Solver(String),
}

impl std::fmt::Display for StepProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StepProblem::NegativeVolume { index, value } => {
                write!(f, "nonpositive specific volume at cell {index}: {value}")
            }
            StepProblem::NegativeTemperature { index, value } => {
                write!(f, "nonpositive temperature at cell {index}: {value}")
            }
            StepProblem::PicardNoConvergence { residual } => {
                write!(f, "Picard iteration stalled at relative residual {residual:e}")
            }
            StepProblem::Solver(msg) => write!(f, "{msg}"),
        }
    }
}

/// Largest stable step: advective CFL bound from the face speed plus the
/// acoustic speed `sqrt(R theta / v)`, an explicit-reaction bound for the
/// Allen-Cahn term, and the `dt_init` cap. Diffusion imposes no restriction
/// because it is implicit.
pub fn stable_dt(state: &State, params: &Params, cfg: &StepConfig, grid: &Grid) -> f64 {
    let mut wave = 0.0f64;
    for c in 0..grid.n_cells {
        let u_face = state.u[c].abs().max(state.u[c + 1].abs());
        let sound = (params.gas_const * state.theta[c] / state.v[c]).sqrt();
        wave = wave.max(u_face + sound);
    }
    let dt_advective = cfg.cfl_safety * grid.dx / wave;
    let v_min = state.v.iter().copied().fold(f64::INFINITY, f64::min);
    let dt_reaction = cfg.cfl_safety * params.epsilon * v_min;
    dt_advective.min(dt_reaction).min(cfg.dt_init)
}

/// Backward-Euler viscosity with explicit pressure and capillary forces:
/// `(u* - u)/dt = nu D_x(u*_x / v) - D_x(p + cap)` with `u* = 0` pinned at
/// both boundary nodes. Solved in delta form as a symmetric tridiagonal
/// system over the interior nodes.
pub fn solve_momentum_implicit(
    state: &State,
    dt: f64,
    params: &Params,
    grid: &Grid,
) -> Result<Vec<f64>> {
    let n = grid.n_cells;
    let dx = grid.dx;
    let p = pressure(&state.v, &state.theta, params)?;
    let cap = capillary_stress(&state.phi, &state.v, params, grid)?;
    let ux = velocity_divergence(&state.u, grid)?;
    let visc: Vec<f64> = (0..n).map(|c| params.nu * ux[c] / state.v[c]).collect();

    let m = n - 1;
    let mut rhs = vec![0.0; m];
    for (k, j) in (1..n).enumerate() {
        let force = (p[j] + cap[j]) - (p[j - 1] + cap[j - 1]);
        rhs[k] = dt * ((visc[j] - visc[j - 1]) / dx - force / dx);
    }

    let a = params.nu * dt / (dx * dx);
    let mut diag = vec![0.0; m];
    let mut off = vec![0.0; m.saturating_sub(1)];
    for (k, j) in (1..n).enumerate() {
        diag[k] = 1.0 + a * (1.0 / state.v[j - 1] + 1.0 / state.v[j]);
        if k + 1 < m {
            off[k] = -a / state.v[j];
        }
    }
    let tri = Tridiagonal::new(off.clone(), diag, off)?;
    let delta = tri.solve(&rhs)?;

    let mut u_star = vec![0.0; n + 1];
    for (k, j) in (1..n).enumerate() {
        u_star[j] = state.u[j] + delta[k];
    }
    Ok(u_star)
}

/// Stabilized semi-implicit Allen-Cahn update on the given specific volume:
/// `(phi* - phi)/(v dt) - eps D_x(phi*_x / v) = -((phi)^2 phi* - phi)/eps`,
/// with the contractive part of the cubic implicit and the destabilizing
/// `-phi` explicit. Homogeneous Neumann boundaries; delta form, so the
/// right-hand side is exactly the negative chemical potential.
pub fn solve_phase_implicit(
    phi_n: &[f64],
    v: &[f64],
    dt: f64,
    params: &Params,
    grid: &Grid,
) -> Result<Vec<f64>> {
    let n = grid.n_cells;
    let dx = grid.dx;
    let eps = params.epsilon;

    let mut w_node = vec![0.0; n + 1];
    for j in 1..n {
        w_node[j] = 1.0 / (dx * dx * 0.5 * (v[j - 1] + v[j]));
    }

    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    for c in 0..n {
        diag[c] = 1.0 / (v[c] * dt) + (phi_n[c] * phi_n[c]) / eps + eps * (w_node[c] + w_node[c + 1]);
        if c + 1 < n {
            off[c] = -eps * w_node[c + 1];
        }
    }
    let mu = chemical_potential(phi_n, v, params, grid)?;
    let rhs: Vec<f64> = mu.iter().map(|&m| -m).collect();

    let tri = Tridiagonal::new(off.clone(), diag, off)?;
    let delta = tri.solve(&rhs)?;
    Ok(phi_n.iter().zip(&delta).map(|(&p, &d)| p + d).collect())
}

struct HeatSolve {
    theta: Vec<f64>,
    picard_iters: usize,
}

/// Picard iteration for the quasilinear heat equation with the conductivity
/// frozen at the previous iterate:
/// `c_v (th* - th)/dt + R (th*/v) u_x - D_x(kappa(th_k) th*_x / v)
///  = nu u_x^2 / v + v mu^2`, insulated boundaries.
fn solve_heat_picard(
    theta_n: &[f64],
    v: &[f64],
    ux: &[f64],
    mu: &[f64],
    dt: f64,
    params: &Params,
    cfg: &StepConfig,
    grid: &Grid,
) -> std::result::Result<HeatSolve, StepProblem> {
    let n = grid.n_cells;
    let dx = grid.dx;
    let cv = params.c_v;
    let r = params.gas_const;

    let source: Vec<f64> = (0..n)
        .map(|c| params.nu * ux[c] * ux[c] / v[c] + v[c] * mu[c] * mu[c])
        .collect();
    let adv: Vec<f64> = (0..n).map(|c| r * ux[c] / v[c]).collect();

    let face_weights = |theta: &[f64]| -> Vec<f64> {
        let mut w = vec![0.0; n + 1];
        for j in 1..n {
            let tf = 0.5 * (theta[j - 1] + theta[j]);
            let vf = 0.5 * (v[j - 1] + v[j]);
            w[j] = params.kappa_tilde * tf.powf(params.beta) / (dx * dx * vf);
        }
        w
    };
    let conduction = |w: &[f64], theta: &[f64], c: usize| -> f64 {
        let right = if c + 1 < n {
            w[c + 1] * (theta[c + 1] - theta[c])
        } else {
            0.0
        };
        let left = if c > 0 { w[c] * (theta[c] - theta[c - 1]) } else { 0.0 };
        right - left
    };
    let max_abs = |f: &[f64]| f.iter().fold(0.0f64, |m, &x| m.max(x.abs()));

    let mut theta_k = theta_n.to_vec();
    for iter in 1..=cfg.picard_max_iter {
        let w = face_weights(&theta_k);
        let mut rhs = vec![0.0; n];
        for c in 0..n {
            rhs[c] = -adv[c] * theta_n[c] + conduction(&w, theta_n, c) + source[c];
        }
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n - 1];
        for c in 0..n {
            diag[c] = cv / dt + adv[c] + w[c] + w[c + 1];
            if c + 1 < n {
                off[c] = -w[c + 1];
            }
        }
        let tri = Tridiagonal::new(off.clone(), diag, off)
            .and_then(|t| t.solve(&rhs))
            .map_err(|e| StepProblem::Solver(e.to_string()))?;
        let theta_new: Vec<f64> = theta_n.iter().zip(&tri).map(|(&t, &d)| t + d).collect();

        for (c, &t) in theta_new.iter().enumerate() {
            if !(t > 0.0) {
                return Err(StepProblem::NegativeTemperature { index: c, value: t });
            }
        }

        // Nonlinear residual with the conductivity re-evaluated at the new
        // iterate, relative to the dominant c_v theta / dt scale.
        let w_new = face_weights(&theta_new);
        let mut res_max = 0.0f64;
        for c in 0..n {
            let res = cv * (theta_new[c] - theta_n[c]) / dt + adv[c] * theta_new[c]
                - conduction(&w_new, &theta_new, c)
                - source[c];
            res_max = res_max.max(res.abs());
        }
        let scale = cv * max_abs(theta_n).max(max_abs(&theta_new)) / dt;
        let rel = res_max / scale;
        if rel <= cfg.picard_tol {
            return Ok(HeatSolve {
                theta: theta_new,
                picard_iters: iter,
            });
        }
        if iter == cfg.picard_max_iter {
            return Err(StepProblem::PicardNoConvergence { residual: rel });
        }
        theta_k = theta_new;
    }
    unreachable!("picard_max_iter >= 1 is enforced by StepConfig::validate");
}

fn try_step(
    state: &State,
    dt: f64,
    params: &Params,
    cfg: &StepConfig,
    grid: &Grid,
) -> std::result::Result<(State, usize), StepProblem> {
    let u_star = solve_momentum_implicit(state, dt, params, grid)
        .map_err(|e| StepProblem::Solver(e.to_string()))?;

    // Exactly telescoping mass update: v* = v + dt u*_x.
    let mut v_star = vec![0.0; grid.n_cells];
    for c in 0..grid.n_cells {
        v_star[c] = state.v[c] + dt * ((u_star[c + 1] - u_star[c]) / grid.dx);
        if !(v_star[c] > 0.0) {
            return Err(StepProblem::NegativeVolume {
                index: c,
                value: v_star[c],
            });
        }
    }

    let phi_star = solve_phase_implicit(&state.phi, &v_star, dt, params, grid)
        .map_err(|e| StepProblem::Solver(e.to_string()))?;
    let mu_star = chemical_potential(&phi_star, &v_star, params, grid)
        .map_err(|e| StepProblem::Solver(e.to_string()))?;
    let ux_star = velocity_divergence(&u_star, grid)
        .map_err(|e| StepProblem::Solver(e.to_string()))?;

    let heat = solve_heat_picard(
        &state.theta,
        &v_star,
        &ux_star,
        &mu_star,
        dt,
        params,
        cfg,
        grid,
    )?;

    Ok((
        State {
            time: state.time + dt,
            v: v_star,
            u: u_star,
            theta: heat.theta,
            phi: phi_star,
        },
        heat.picard_iters,
    ))
}

/// Advance one step at the stable step size, halving on failure signals
/// until `dt_min` underflows.
pub fn step(state: &State, params: &Params, cfg: &StepConfig, grid: &Grid) -> Result<StepOutcome> {
    step_capped(state, params, cfg, grid, f64::INFINITY)
}

/// `step` with an additional cap on the step size (used to land exactly on
/// the requested end time).
pub fn step_capped(
    state: &State,
    params: &Params,
    cfg: &StepConfig,
    grid: &Grid,
    dt_cap: f64,
) -> Result<StepOutcome> {
    let mut dt = stable_dt(state, params, cfg, grid).min(dt_cap);
    let mut halvings = 0;
    loop {
        match try_step(state, dt, params, cfg, grid) {
            Ok((new_state, picard_iters)) => {
                return Ok(StepOutcome {
                    state: new_state,
                    dt_used: dt,
                    picard_iters,
                    halvings,
                });
            }
            Err(problem) => {
                dt *= 0.5;
                halvings += 1;
                if dt < cfg.dt_min {
                    return Err(Error::StepFailed {
                        time: state.time,
                        dt,
                        dt_min: cfg.dt_min,
                        halvings,
                        cause: problem.to_string(),
                    });
                }
            }
        }
    }
}

/// What the integrator keeps full states (and integral snapshots) for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateRetention {
    /// Initial and final state only.
    FinalOnly,
    /// Initial, every k-th accepted step, and final.
    Every(usize),
}

/// Whether an observer wants the run to continue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObserverControl {
    Continue,
    Halt,
}

/// Callback invoked after every accepted step. Observers see the new state,
/// the step size, and the accumulated time integrals; they must not mutate
/// the state.
pub trait Observer {
    fn on_step(
        &mut self,
        state: &State,
        dt_used: f64,
        integrals: &RunningIntegrals,
        record: &DiagnosticsRecord,
    ) -> Result<ObserverControl>;
}

/// State plus accumulated integrals at one retained instant.
#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub state: State,
    pub integrals: RunningIntegrals,
}

/// Time-ordered record of a run: per-step diagnostics scalars, retained
/// states with their integral snapshots, and step statistics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub initial_state: State,
    pub records: Vec<DiagnosticsRecord>,
    pub points: Vec<TrajectoryPoint>,
    pub steps: usize,
    pub total_halvings: usize,
    pub total_picard_iters: usize,
    pub dt_min_used: f64,
    pub dt_max_used: f64,
    /// False when an observer halted the run before `t_end`.
    pub completed: bool,
}

impl Trajectory {
    pub fn final_point(&self) -> &TrajectoryPoint {
        self.points.last().expect("trajectory always retains the final point")
    }

    pub fn final_state(&self) -> &State {
        &self.final_point().state
    }

    pub fn dt_mean(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.final_state().time / self.steps as f64
        }
    }
}

/// A failed run, with whatever prefix of the trajectory was completed.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: Option<Box<Trajectory>>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for RunFailure {}

/// Integrate from the (validated, normalized) initial state to exactly
/// `t_end`, invoking the observers after every accepted step and
/// accumulating the dissipation and representation integrals in time.
pub fn run(
    initial: &State,
    params: &Params,
    cfg: &StepConfig,
    grid: &Grid,
    t_end: f64,
    observers: &mut [&mut dyn Observer],
    retention: StateRetention,
) -> std::result::Result<Trajectory, RunFailure> {
    let hard = |error: Error| RunFailure {
        error,
        partial: None,
    };
    cfg.validate().map_err(hard)?;
    if !(t_end > initial.time) {
        return Err(hard(Error::InvalidParameter {
            name: "t_end",
            value: t_end,
            constraint: "must exceed the initial time",
        }));
    }

    let mut integrals = RunningIntegrals::new(initial, params, grid).map_err(hard)?;
    let record0 = DiagnosticsRecord::compute(initial, params, grid, Some(&integrals)).map_err(hard)?;

    let mut traj = Trajectory {
        initial_state: initial.clone(),
        records: vec![record0],
        points: vec![TrajectoryPoint {
            step: 0,
            state: initial.clone(),
            integrals: integrals.clone(),
        }],
        steps: 0,
        total_halvings: 0,
        total_picard_iters: 0,
        dt_min_used: f64::INFINITY,
        dt_max_used: 0.0,
        completed: false,
    };

    let mut current = initial.clone();
    while current.time < t_end {
        let remaining = t_end - current.time;
        let outcome = step_capped(&current, params, cfg, grid, remaining);
        let mut outcome = match outcome {
            Ok(o) => o,
            Err(error) => {
                return Err(RunFailure {
                    error,
                    partial: Some(Box::new(traj)),
                });
            }
        };
        if outcome.dt_used == remaining {
            outcome.state.time = t_end;
        }

        if let Err(error) = integrals.update(&outcome.state, outcome.dt_used, params, grid) {
            return Err(RunFailure {
                error,
                partial: Some(Box::new(traj)),
            });
        }
        let record =
            match DiagnosticsRecord::compute(&outcome.state, params, grid, Some(&integrals)) {
                Ok(r) => r,
                Err(error) => {
                    return Err(RunFailure {
                        error,
                        partial: Some(Box::new(traj)),
                    });
                }
            };

        traj.steps += 1;
        traj.total_halvings += outcome.halvings;
        traj.total_picard_iters += outcome.picard_iters;
        traj.dt_min_used = traj.dt_min_used.min(outcome.dt_used);
        traj.dt_max_used = traj.dt_max_used.max(outcome.dt_used);
        traj.records.push(record);

        if let StateRetention::Every(k) = retention {
            if k > 0 && traj.steps % k == 0 && outcome.state.time < t_end {
                traj.points.push(TrajectoryPoint {
                    step: traj.steps,
                    state: outcome.state.clone(),
                    integrals: integrals.clone(),
                });
            }
        }

        let mut halt = false;
        for obs in observers.iter_mut() {
            let record = traj.records.last().unwrap();
            match obs.on_step(&outcome.state, outcome.dt_used, &integrals, record) {
                Ok(ObserverControl::Continue) => {}
                Ok(ObserverControl::Halt) => halt = true,
                Err(error) => {
                    return Err(RunFailure {
                        error,
                        partial: Some(Box::new(traj)),
                    });
                }
            }
        }

        current = outcome.state;
        if halt {
            break;
        }
    }

    traj.completed = current.time >= t_end;
    traj.points.push(TrajectoryPoint {
        step: traj.steps,
        state: current,
        integrals,
    });
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::make_grid;
    use std::f64::consts::PI;

    fn params() -> Params {
        Params::new(0.1, 1.0).unwrap()
    }

    fn equilibrium(grid: &Grid) -> State {
        State {
            time: 0.0,
            v: vec![1.0; grid.n_cells],
            u: vec![0.0; grid.n_nodes()],
            theta: vec![1.0; grid.n_cells],
            phi: vec![1.0; grid.n_cells],
        }
    }

    fn smooth_state(grid: &Grid) -> State {
        let n = grid.n_cells;
        let v: Vec<f64> = grid
            .centers
            .iter()
            .map(|&x| 1.0 + 0.3 * (2.0 * PI * x).sin())
            .collect();
        let theta: Vec<f64> = grid
            .centers
            .iter()
            .map(|&x| 1.0 + 0.2 * (2.0 * PI * x).cos())
            .collect();
        let mut u: Vec<f64> = grid.nodes.iter().map(|&x| 0.2 * (PI * x).sin()).collect();
        u[0] = 0.0;
        u[n] = 0.0;
        let phi: Vec<f64> = grid
            .centers
            .iter()
            .map(|&x| ((x - 0.5) / (2.0_f64.sqrt() * 0.1)).tanh())
            .collect();
        State {
            time: 0.0,
            v,
            u,
            theta,
            phi,
        }
    }

    #[test]
    fn stable_dt_equilibrium() {
        let grid = make_grid(128).unwrap();
        let cfg = StepConfig {
            cfl_safety: 0.5,
            ..StepConfig::default()
        };
        // Sound speed is exactly 1, so the advective bound is cfl * dx; the
        // reaction bound 0.5 * eps = 0.05 does not bind.
        let dt = stable_dt(&equilibrium(&grid), &params(), &cfg, &grid);
        assert_eq!(dt, 0.5 / 128.0);
    }

    #[test]
    fn stable_dt_scales_with_dx_and_velocity() {
        let cfg = StepConfig::default();
        let g1 = make_grid(128).unwrap();
        let g2 = make_grid(256).unwrap();
        let dt1 = stable_dt(&equilibrium(&g1), &params(), &cfg, &g1);
        let dt2 = stable_dt(&equilibrium(&g2), &params(), &cfg, &g2);
        assert_eq!(dt2, 0.5 * dt1);

        let mut fast = smooth_state(&g1);
        let dt_slow = stable_dt(&fast, &params(), &cfg, &g1);
        for u in &mut fast.u {
            *u *= 10.0;
        }
        let dt_fast = stable_dt(&fast, &params(), &cfg, &g1);
        assert!(dt_fast < dt_slow);
    }

    #[test]
    fn momentum_zero_forces_zero_velocity() {
        let grid = make_grid(64).unwrap();
        let state = equilibrium(&grid);
        let u = solve_momentum_implicit(&state, 1e-3, &params(), &grid).unwrap();
        assert!(u.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn momentum_diffusion_is_dissipative() {
        let grid = make_grid(64).unwrap();
        let mut state = equilibrium(&grid);
        for (j, u) in state.u.iter_mut().enumerate() {
            *u = (PI * grid.nodes[j]).sin();
        }
        state.u[0] = 0.0;
        state.u[64] = 0.0;
        let u = solve_momentum_implicit(&state, 1e-2, &params(), &grid).unwrap();
        let norm = |f: &[f64]| f.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm(&u) < norm(&state.u));
        assert_eq!(u[0], 0.0);
        assert_eq!(u[64], 0.0);
    }

    #[test]
    fn momentum_solve_satisfies_equation() {
        // Independent check: the returned u* satisfies the implicit equation
        // (u* - u)/dt - nu D_x(u*_x / v) + D_x(p + cap) = 0 at every
        // interior node.
        let grid = make_grid(64).unwrap();
        let p = params();
        let state = smooth_state(&grid);
        let dt = 2e-3;
        let u_star = solve_momentum_implicit(&state, dt, &p, &grid).unwrap();

        let pr = pressure(&state.v, &state.theta, &p).unwrap();
        let cap = capillary_stress(&state.phi, &state.v, &p, &grid).unwrap();
        let dx = grid.dx;
        let w: Vec<f64> = (0..64)
            .map(|c| p.nu * (u_star[c + 1] - u_star[c]) / dx / state.v[c])
            .collect();
        let mut res_max = 0.0f64;
        for j in 1..64 {
            let res = (u_star[j] - state.u[j]) / dt - (w[j] - w[j - 1]) / dx
                + ((pr[j] + cap[j]) - (pr[j - 1] + cap[j - 1])) / dx;
            res_max = res_max.max(res.abs() * dt);
        }
        assert!(res_max < 1e-12, "scaled residual {res_max:e}");
    }

    #[test]
    fn phase_fixed_points_are_bitwise() {
        let grid = make_grid(64).unwrap();
        let v: Vec<f64> = grid.centers.iter().map(|&x| 1.0 + 0.2 * x).collect();
        for root in [1.0, 0.0, -1.0] {
            let phi = vec![root; 64];
            let out = solve_phase_implicit(&phi, &v, 1e-3, &params(), &grid).unwrap();
            assert_eq!(out, phi, "root {root}");
        }
    }

    #[test]
    fn phase_update_matches_explicit_euler_as_dt_vanishes() {
        let grid = make_grid(128).unwrap();
        let p = params();
        let state = smooth_state(&grid);
        let v = vec![1.0; 128];
        let mu = chemical_potential(&state.phi, &v, &p, &grid).unwrap();
        let explicit_rate: Vec<f64> = (0..128).map(|c| -v[c] * mu[c]).collect();

        let defect = |dt: f64| -> f64 {
            let phi = solve_phase_implicit(&state.phi, &v, dt, &p, &grid).unwrap();
            (0..128)
                .map(|c| (phi[c] - state.phi[c] - dt * explicit_rate[c]).abs())
                .fold(0.0, f64::max)
        };
        let (d1, d2) = (defect(1e-4), defect(5e-5));
        let order = (d1 / d2).log2();
        assert!(order > 1.8, "per-step defect order {order} ({d1:e}, {d2:e})");
    }

    #[test]
    fn heat_equilibrium_single_iteration() {
        let grid = make_grid(64).unwrap();
        let cfg = StepConfig::default();
        let ux = vec![0.0; 64];
        let mu = vec![0.0; 64];
        let out = solve_heat_picard(
            &vec![1.0; 64],
            &vec![1.0; 64],
            &ux,
            &mu,
            1e-3,
            &params(),
            &cfg,
            &grid,
        )
        .unwrap();
        assert_eq!(out.theta, vec![1.0; 64]);
        assert_eq!(out.picard_iters, 1);
    }

    #[test]
    fn heat_linear_conduction_single_iteration() {
        // With beta effectively zero the conductivity is constant, so the
        // first linear solve already satisfies the nonlinear equation.
        let grid = make_grid(64).unwrap();
        let mut p = params();
        p.beta = 1e-300;
        let cfg = StepConfig::default();
        let theta: Vec<f64> = grid
            .centers
            .iter()
            .map(|&x| 1.0 + 0.3 * (PI * x).cos())
            .collect();
        let out = solve_heat_picard(
            &theta,
            &vec![1.0; 64],
            &vec![0.0; 64],
            &vec![0.0; 64],
            1e-3,
            &p,
            &cfg,
            &grid,
        )
        .unwrap();
        assert_eq!(out.picard_iters, 1);
    }

    #[test]
    fn equilibrium_is_exact_fixed_point() {
        let grid = make_grid(64).unwrap();
        let cfg = StepConfig::default();
        let mut state = equilibrium(&grid);
        for _ in 0..100 {
            let out = step(&state, &params(), &cfg, &grid).unwrap();
            assert_eq!(out.state.v, state.v);
            assert_eq!(out.state.u, state.u);
            assert_eq!(out.state.theta, state.theta);
            assert_eq!(out.state.phi, state.phi);
            assert_eq!(out.halvings, 0);
            state = out.state;
        }
    }

    #[test]
    fn mass_is_conserved_per_step() {
        let grid = make_grid(128).unwrap();
        let cfg = StepConfig::default();
        let state = smooth_state(&grid);
        let mass = crate::state::integrate(&state.v, &grid).unwrap();
        let out = step(&state, &params(), &cfg, &grid).unwrap();
        let mass_after = crate::state::integrate(&out.state.v, &grid).unwrap();
        assert!(
            (mass_after - mass).abs() <= 4.0 * f64::EPSILON * mass.abs(),
            "mass drift {:e}",
            mass_after - mass
        );
    }

    #[test]
    fn step_richardson_second_order_local_error() {
        let grid = make_grid(64).unwrap();
        let p = params();
        let cfg = StepConfig::default();
        let state = smooth_state(&grid);

        // Reference: many tiny steps to the same horizon.
        let horizon = 4e-4;
        let reference = {
            let mut s = state.clone();
            let tiny = StepConfig {
                dt_init: horizon / 256.0,
                ..cfg
            };
            while s.time < horizon {
                let remaining = horizon - s.time;
                s = step_capped(&s, &p, &tiny, &grid, remaining).unwrap().state;
            }
            s
        };
        let err = |dt: f64| -> f64 {
            let mut s = state.clone();
            let c = StepConfig { dt_init: dt, ..cfg };
            while s.time < horizon {
                let remaining = horizon - s.time;
                s = step_capped(&s, &p, &c, &grid, remaining).unwrap().state;
            }
            s.v.iter()
                .zip(&reference.v)
                .chain(s.theta.iter().zip(&reference.theta))
                .chain(s.phi.iter().zip(&reference.phi))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        // Global error over a fixed horizon at O(dt) implies per-step O(dt^2).
        let (e1, e2) = (err(horizon / 2.0), err(horizon / 4.0));
        let order = (e1 / e2).log2();
        assert!(
            order > 0.8,
            "global-in-time order {order} ({e1:e}, {e2:e})"
        );
    }

    #[test]
    fn failing_step_halves_then_succeeds() {
        let grid = make_grid(32).unwrap();
        let p = params();
        let cfg = StepConfig {
            cfl_safety: 1.0,
            ..StepConfig::default()
        };
        // Strong colliding flow: at the raw CFL step the compression would
        // drive v negative, forcing at least one halving.
        let mut state = equilibrium(&grid);
        state.v = vec![0.5; 32];
        for (j, u) in state.u.iter_mut().enumerate() {
            *u = if grid.nodes[j] < 0.5 { 40.0 } else { -40.0 };
        }
        state.u[0] = 0.0;
        state.u[32] = 0.0;
        let out = step(&state, &p, &cfg, &grid).unwrap();
        assert!(out.halvings >= 1, "expected halvings, got {}", out.halvings);
        assert!(out.state.v.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn dt_underflow_fails_hard() {
        let grid = make_grid(32).unwrap();
        let p = params();
        let mut state = equilibrium(&grid);
        state.v = vec![0.5; 32];
        for (j, u) in state.u.iter_mut().enumerate() {
            *u = if grid.nodes[j] < 0.5 { 40.0 } else { -40.0 };
        }
        state.u[0] = 0.0;
        state.u[32] = 0.0;
        let stable = stable_dt(&state, &p, &StepConfig { cfl_safety: 1.0, ..Default::default() }, &grid);
        let cfg = StepConfig {
            cfl_safety: 1.0,
            dt_min: 0.9 * stable,
            ..StepConfig::default()
        };
        match step(&state, &p, &cfg, &grid) {
            Err(Error::StepFailed { halvings, .. }) => assert!(halvings >= 1),
            other => panic!("expected StepFailed, got {other:?}"),
        }
    }

    #[test]
    fn run_reaches_t_end_exactly() {
        let grid = make_grid(32).unwrap();
        let cfg = StepConfig::default();
        let state = equilibrium(&grid);
        let t_end = 0.0173;
        let traj = run(
            &state,
            &params(),
            &cfg,
            &grid,
            t_end,
            &mut [],
            StateRetention::FinalOnly,
        )
        .unwrap();
        assert_eq!(traj.final_state().time, t_end);
        assert!(traj.completed);
        assert_eq!(traj.final_state().v, state.v);
        assert_eq!(traj.final_state().theta, state.theta);
        assert_eq!(traj.records.len(), traj.steps + 1);
    }

    struct CountingObserver {
        calls: usize,
        halt_after: Option<usize>,
    }

    impl Observer for CountingObserver {
        fn on_step(
            &mut self,
            _state: &State,
            dt_used: f64,
            _integrals: &RunningIntegrals,
            _record: &DiagnosticsRecord,
        ) -> Result<ObserverControl> {
            assert!(dt_used > 0.0);
            self.calls += 1;
            Ok(match self.halt_after {
                Some(k) if self.calls >= k => ObserverControl::Halt,
                _ => ObserverControl::Continue,
            })
        }
    }

    #[test]
    fn observers_fire_each_step_and_can_halt() {
        let grid = make_grid(32).unwrap();
        let cfg = StepConfig::default();
        let state = equilibrium(&grid);
        let mut obs = CountingObserver {
            calls: 0,
            halt_after: None,
        };
        let traj = run(
            &state,
            &params(),
            &cfg,
            &grid,
            0.01,
            &mut [&mut obs],
            StateRetention::FinalOnly,
        )
        .unwrap();
        assert_eq!(obs.calls, traj.steps);

        let mut obs = CountingObserver {
            calls: 0,
            halt_after: Some(2),
        };
        let traj = run(
            &state,
            &params(),
            &cfg,
            &grid,
            0.2,
            &mut [&mut obs],
            StateRetention::FinalOnly,
        )
        .unwrap();
        assert_eq!(traj.steps, 2);
        assert!(!traj.completed);
    }
}
