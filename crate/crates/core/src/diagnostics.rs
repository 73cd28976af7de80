//! Verification harness: conservation functionals, the entropy-dissipation
//! balance, the multiplicative representation of the specific volume, the
//! mean-temperature bracket, pointwise bound monitors, and self-convergence
//! studies.
//!
//! Everything here observes a trajectory; nothing feeds back into the solver.
//! Monitors report violations, they never abort or clamp.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{
    chemical_potential, grad_at_nodes, phi_gradsq_at_centers, velocity_divergence, GradientBc,
};
use crate::state::{compensated_sum, integrate, trapezoid_nodes, Grid, Params, State};

/// Per-instant diagnostic scalars, recorded after every accepted step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    /// Total mass, `int v dx`.
    pub mass: f64,
    /// Conserved total energy, `int (u^2/2 + c_v theta + W(phi) + (eps/2) phi_x^2 / v) dx`.
    pub energy: f64,
    /// Entropy functional `F`.
    pub entropy_f: f64,
    /// Instantaneous dissipation rate `V >= 0`.
    pub dissipation_v: f64,
    /// Time-accumulated dissipation `int_0^t V ds` (trapezoid in time).
    pub int_v_ds: f64,
    /// Plain `int (theta - ln theta) dx`, used by the Jensen check.
    pub theta_entropy: f64,
    pub mean_theta: f64,
    pub min_v: f64,
    pub argmin_v: usize,
    pub max_v: f64,
    pub min_theta: f64,
    pub argmin_theta: usize,
    pub max_theta: f64,
    pub min_phi: f64,
    pub argmin_phi: usize,
    pub max_phi: f64,
    pub argmax_phi: usize,
    /// L-inf mismatch of the reconstructed specific volume, when available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recon_linf: Option<f64>,
}

/// Conserved integrals of one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conserved {
    pub mass: f64,
    pub energy: f64,
}

fn extrema(field: &[f64]) -> (f64, usize, f64, usize) {
    let mut min = f64::INFINITY;
    let mut argmin = 0;
    let mut max = f64::NEG_INFINITY;
    let mut argmax = 0;
    for (i, &x) in field.iter().enumerate() {
        if x.is_nan() {
            return (f64::NAN, i, f64::NAN, i);
        }
        if x < min {
            min = x;
            argmin = i;
        }
        if x > max {
            max = x;
            argmax = i;
        }
    }
    (min, argmin, max, argmax)
}

fn double_well(phi: f64, eps: f64) -> f64 {
    let q = phi * phi - 1.0;
    q * q / (4.0 * eps)
}

/// Total mass and total energy by midpoint rule (node trapezoid for the
/// kinetic term, whose boundary values vanish).
pub fn conserved_quantities(state: &State, params: &Params, grid: &Grid) -> Result<Conserved> {
    let mass = integrate(&state.v, grid)?;
    let gradsq = phi_gradsq_at_centers(&state.phi, grid)?;
    let kinetic = trapezoid_nodes(
        |j| 0.5 * state.u[j] * state.u[j],
        grid.n_nodes(),
        grid.dx,
    );
    let density: Vec<f64> = (0..grid.n_cells)
        .map(|c| {
            params.c_v * state.theta[c]
                + double_well(state.phi[c], params.epsilon)
                + 0.5 * params.epsilon * gradsq[c] / state.v[c]
        })
        .collect();
    let energy = kinetic + integrate(&density, grid)?;
    Ok(Conserved { mass, energy })
}

/// The entropy functional
/// `F = int (u^2/2 + W(phi) + (eps/2) phi_x^2/v + R(v - ln v) + c_v(theta - ln theta)) dx`.
/// Bounded below by `R + c_v` with equality only at the constant equilibria.
pub fn entropy_functional(state: &State, params: &Params, grid: &Grid) -> Result<f64> {
    for (i, &v) in state.v.iter().enumerate() {
        if !(v > 0.0) {
            return Err(Error::NonPositive {
                field: "v",
                index: i,
                value: v,
            });
        }
    }
    for (i, &t) in state.theta.iter().enumerate() {
        if !(t > 0.0) {
            return Err(Error::NonPositive {
                field: "theta",
                index: i,
                value: t,
            });
        }
    }
    let gradsq = phi_gradsq_at_centers(&state.phi, grid)?;
    let kinetic = trapezoid_nodes(
        |j| 0.5 * state.u[j] * state.u[j],
        grid.n_nodes(),
        grid.dx,
    );
    let density: Vec<f64> = (0..grid.n_cells)
        .map(|c| {
            double_well(state.phi[c], params.epsilon)
                + 0.5 * params.epsilon * gradsq[c] / state.v[c]
                + params.gas_const * (state.v[c] - state.v[c].ln())
                + params.c_v * (state.theta[c] - state.theta[c].ln())
        })
        .collect();
    Ok(kinetic + integrate(&density, grid)?)
}

/// `int (theta - ln theta) dx`, the temperature part of `F` without `c_v`.
pub fn theta_entropy(state: &State, grid: &Grid) -> Result<f64> {
    let density: Vec<f64> = state.theta.iter().map(|&t| t - t.ln()).collect();
    integrate(&density, grid)
}

/// Dissipation rate
/// `V = int (kappa(theta) theta_x^2 / (v theta^2) + nu u_x^2 / (v theta) + v mu^2 / theta) dx`,
/// nonnegative for every valid state. The conduction term lives at nodes with
/// face-averaged `v` and `theta`; the boundary fluxes vanish.
pub fn dissipation_rate(state: &State, params: &Params, grid: &Grid) -> Result<f64> {
    let n = grid.n_cells;
    let dx = grid.dx;
    let g = grad_at_nodes(&state.theta, grid, GradientBc::Neumann)?.values;
    let conduction = compensated_sum((1..n).map(|j| {
        let tf = 0.5 * (state.theta[j - 1] + state.theta[j]);
        let vf = 0.5 * (state.v[j - 1] + state.v[j]);
        params.kappa_tilde * tf.powf(params.beta) * g[j] * g[j] / (vf * tf * tf)
    })) * dx;

    let ux = velocity_divergence(&state.u, grid)?;
    let mu = chemical_potential(&state.phi, &state.v, params, grid)?;
    for (i, &t) in state.theta.iter().enumerate() {
        if !(t > 0.0) {
            return Err(Error::NonPositive {
                field: "theta",
                index: i,
                value: t,
            });
        }
    }
    let shear = compensated_sum(
        (0..n).map(|c| params.nu * ux[c] * ux[c] / (state.v[c] * state.theta[c])),
    ) * dx;
    let phase = compensated_sum(
        (0..n).map(|c| state.v[c] * mu[c] * mu[c] / state.theta[c]),
    ) * dx;
    Ok(conduction + shear + phase)
}

/// Rate `int (u^2 + R theta + (eps/2) phi_x^2 / v) dx` whose time integral is
/// the exponent of `Y`.
fn y_exponent_rate(state: &State, params: &Params, grid: &Grid) -> Result<f64> {
    let gradsq = phi_gradsq_at_centers(&state.phi, grid)?;
    let kinetic = trapezoid_nodes(|j| state.u[j] * state.u[j], grid.n_nodes(), grid.dx);
    let density: Vec<f64> = (0..grid.n_cells)
        .map(|c| {
            params.gas_const * state.theta[c] + 0.5 * params.epsilon * gradsq[c] / state.v[c]
        })
        .collect();
    Ok(kinetic + integrate(&density, grid)?)
}

/// Cumulative integral of the node velocity up to each cell center, exact for
/// the piecewise-linear interpolant.
fn cumulative_u_at_centers(u: &[f64], grid: &Grid) -> Vec<f64> {
    let n = grid.n_cells;
    let dx = grid.dx;
    let mut at_node = vec![0.0; n + 1];
    for j in 0..n {
        at_node[j + 1] = at_node[j] + dx * 0.5 * (u[j] + u[j + 1]);
    }
    (0..n)
        .map(|c| at_node[c] + dx / 8.0 * (3.0 * u[c] + u[c + 1]))
        .collect()
}

/// `H = R theta + (eps/2) phi_x^2 / v` at centers, the numerator of the
/// representation's time integrand.
fn representation_numerator(state: &State, params: &Params, grid: &Grid) -> Result<Vec<f64>> {
    let gradsq = phi_gradsq_at_centers(&state.phi, grid)?;
    Ok((0..grid.n_cells)
        .map(|c| {
            params.gas_const * state.theta[c] + 0.5 * params.epsilon * gradsq[c] / state.v[c]
        })
        .collect())
}

/// Accumulated time integrals maintained by the integrator: the dissipation
/// integral and the bookkeeping of the representation formula
/// `v(x,t) = D(x,t) Y(t) (1 + int_0^t (R theta + (eps/2) phi_x^2/v) / (D Y) dtau)`.
///
/// The `Y` exponent and `int V ds` accumulate by trapezoid in time. The inner
/// time integral uses the trapezoid of the slowly varying factor `H / D`
/// multiplied by the exact integral of `exp(A(tau))` with `A` linear on the
/// step; the increments then telescope, so a stationary state reconstructs to
/// roundoff regardless of step count.
#[derive(Debug, Clone)]
pub struct RunningIntegrals {
    pub t: f64,
    /// `int_0^t V ds`.
    pub int_v_ds: f64,
    /// Exponent `A(t) = int_0^t int (u^2 + R theta + (eps/2) phi_x^2/v) dx ds`,
    /// so `Y = exp(-A)`.
    pub a_time: f64,
    /// Per-cell accumulation of the representation's time integral.
    pub s_field: Vec<f64>,
    /// Whether the representation bookkeeping is valid (requires `nu = 1`,
    /// the normalization under which the formula is derived).
    pub recon_valid: bool,
    v_prev: f64,
    w_prev: f64,
    p_prev: Vec<f64>,
    v0: Vec<f64>,
    icum0: Vec<f64>,
    j0: f64,
}

fn inner_moment(v: &[f64], icum: &[f64], grid: &Grid) -> f64 {
    compensated_sum((0..grid.n_cells).map(|c| v[c] * icum[c])) * grid.dx
}

impl RunningIntegrals {
    pub fn new(initial: &State, params: &Params, grid: &Grid) -> Result<Self> {
        let v_prev = dissipation_rate(initial, params, grid)?;
        let w_prev = y_exponent_rate(initial, params, grid)?;
        let icum0 = cumulative_u_at_centers(&initial.u, grid);
        let j0 = inner_moment(&initial.v, &icum0, grid);
        let mut out = RunningIntegrals {
            t: initial.time,
            int_v_ds: 0.0,
            a_time: 0.0,
            s_field: vec![0.0; grid.n_cells],
            recon_valid: params.nu == 1.0,
            v_prev,
            w_prev,
            p_prev: vec![0.0; grid.n_cells],
            v0: initial.v.clone(),
            icum0,
            j0,
        };
        if out.recon_valid {
            let d = out.d_field(initial, grid);
            let h = representation_numerator(initial, params, grid)?;
            out.p_prev = h.iter().zip(&d).map(|(&hi, &di)| hi / di).collect();
        }
        Ok(out)
    }

    /// The factor `D(x,t)`: the initial volume modulated by the cumulative
    /// velocity integral and its volume-weighted moment. All exponents vanish
    /// identically at `t = 0`, so `D(., 0) = v0` bitwise.
    pub fn d_field(&self, state: &State, grid: &Grid) -> Vec<f64> {
        let icum = cumulative_u_at_centers(&state.u, grid);
        let j = inner_moment(&state.v, &icum, grid);
        (0..grid.n_cells)
            .map(|c| self.v0[c] * ((icum[c] - self.icum0[c]) + (self.j0 - j)).exp())
            .collect()
    }

    /// Advance the accumulators across one accepted step ending at `state`.
    pub fn update(&mut self, state: &State, dt: f64, params: &Params, grid: &Grid) -> Result<()> {
        let v_new = dissipation_rate(state, params, grid)?;
        self.int_v_ds += 0.5 * dt * (self.v_prev + v_new);
        self.v_prev = v_new;

        let w_new = y_exponent_rate(state, params, grid)?;
        let a_new = self.a_time + 0.5 * dt * (self.w_prev + w_new);

        if self.recon_valid && a_new < 700.0 {
            let d = self.d_field(state, grid);
            let h = representation_numerator(state, params, grid)?;
            let p_new: Vec<f64> = h.iter().zip(&d).map(|(&hi, &di)| hi / di).collect();
            let slope = (a_new - self.a_time) / dt;
            let factor = if slope != 0.0 {
                (a_new.exp() - self.a_time.exp()) / slope
            } else {
                dt * self.a_time.exp()
            };
            for c in 0..grid.n_cells {
                self.s_field[c] += 0.5 * (self.p_prev[c] + p_new[c]) * factor;
            }
            self.p_prev = p_new;
        } else {
            self.recon_valid = false;
        }

        self.a_time = a_new;
        self.w_prev = w_new;
        self.t = state.time;
        Ok(())
    }

    pub fn y(&self) -> f64 {
        (-self.a_time).exp()
    }
}

/// Reconstruction of `v` from the representation formula at one instant.
#[derive(Debug, Clone)]
pub struct RepresentationCheck {
    pub d_field: Vec<f64>,
    pub y: f64,
    pub v_reconstructed: Vec<f64>,
    pub linf_error: f64,
}

/// Evaluate the representation of `v` against the simulated field.
pub fn representation_check(
    state: &State,
    integrals: &RunningIntegrals,
    grid: &Grid,
) -> Result<RepresentationCheck> {
    if !integrals.recon_valid {
        return Err(Error::InvalidParameter {
            name: "nu",
            value: f64::NAN,
            constraint: "representation formula requires nu = 1 and bounded exponents",
        });
    }
    let d_field = integrals.d_field(state, grid);
    let y = integrals.y();
    let v_reconstructed: Vec<f64> = (0..grid.n_cells)
        .map(|c| d_field[c] * y * (1.0 + integrals.s_field[c]))
        .collect();
    let linf_error = v_reconstructed
        .iter()
        .zip(&state.v)
        .map(|(&r, &v)| (r - v).abs())
        .fold(0.0, f64::max);
    Ok(RepresentationCheck {
        d_field,
        y,
        v_reconstructed,
        linf_error,
    })
}

/// Evaluate the representation at a retained instant of a trajectory.
pub fn reconstruct_v(
    trajectory: &crate::integrator::Trajectory,
    t: f64,
) -> Result<RepresentationCheck> {
    let grid = crate::state::make_grid(trajectory.initial_state.n_cells())?;
    let point = trajectory
        .points
        .iter()
        .find(|p| (p.state.time - t).abs() <= 1e-14 * t.abs().max(1.0))
        .ok_or(Error::InvalidParameter {
            name: "t",
            value: t,
            constraint: "no retained trajectory point at this time",
        })?;
    representation_check(&point.state, &point.integrals, &grid)
}

impl DiagnosticsRecord {
    pub fn compute(
        state: &State,
        params: &Params,
        grid: &Grid,
        integrals: Option<&RunningIntegrals>,
    ) -> Result<Self> {
        let conserved = conserved_quantities(state, params, grid)?;
        let entropy_f = entropy_functional(state, params, grid)?;
        let dissipation_v = dissipation_rate(state, params, grid)?;
        let theta_entropy = theta_entropy(state, grid)?;
        let mean_theta = integrate(&state.theta, grid)?;
        let (min_v, argmin_v, max_v, _) = extrema(&state.v);
        let (min_theta, argmin_theta, max_theta, _) = extrema(&state.theta);
        let (min_phi, argmin_phi, max_phi, argmax_phi) = extrema(&state.phi);
        let int_v_ds = integrals.map_or(0.0, |ri| ri.int_v_ds);
        let recon_linf = match integrals {
            Some(ri) if ri.recon_valid => {
                Some(representation_check(state, ri, grid)?.linf_error)
            }
            _ => None,
        };
        Ok(DiagnosticsRecord {
            time: state.time,
            mass: conserved.mass,
            energy: conserved.energy,
            entropy_f,
            dissipation_v,
            int_v_ds,
            theta_entropy,
            mean_theta,
            min_v,
            argmin_v,
            max_v,
            min_theta,
            argmin_theta,
            max_theta,
            min_phi,
            argmin_phi,
            max_phi,
            argmax_phi,
            recon_linf,
        })
    }
}

/// Residual of the entropy-dissipation balance,
/// `r(t) = F(t) + int_0^t V ds - F(0)`, per recorded instant. The continuum
/// balance is an exact equality under the insulated boundaries, so the
/// residual measures the scheme's truncation error.
pub fn entropy_balance_residual(trajectory: &crate::integrator::Trajectory) -> Vec<(f64, f64)> {
    let f0 = match trajectory.records.first() {
        Some(r) => r.entropy_f,
        None => return Vec::new(),
    };
    trajectory
        .records
        .iter()
        .map(|r| (r.time, r.entropy_f + r.int_v_ds - f0))
        .collect()
}

/// The two positive roots of `x - ln x = E0` bracketing 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundBracket {
    pub alpha1: f64,
    pub alpha2: f64,
}

/// Solve `x - ln x = E0` by bisection on each side of the minimum at `x = 1`.
pub fn temperature_bracket(e0: f64) -> Result<BoundBracket> {
    if !(e0 >= 1.0) {
        return Err(Error::NoRoot { e0 });
    }
    if e0 == 1.0 {
        return Ok(BoundBracket {
            alpha1: 1.0,
            alpha2: 1.0,
        });
    }
    let f = |x: f64| x - x.ln() - e0;
    let bisect = |mut lo: f64, mut hi: f64| -> f64 {
        // f(lo) and f(hi) have opposite signs by construction.
        let increasing = f(hi) > 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            let positive = f(mid) > 0.0;
            if positive == increasing {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let lo1 = (-e0 - 1.0).exp();
    let alpha1 = bisect(lo1, 1.0);
    let alpha2 = bisect(1.0, 2.0 * e0 + 2.0);
    Ok(BoundBracket { alpha1, alpha2 })
}

/// Tolerances for the runtime bound monitors. The mean-temperature check is
/// armed only when `mean_theta_upper` is set: 1 under the reference energy
/// normalization, the actual initial energy over `c_v` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorConfig {
    pub tol_phi: f64,
    pub mean_theta_tol: f64,
    pub mean_theta_upper: Option<f64>,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            tol_phi: 1e-8,
            mean_theta_tol: 1e-6,
            mean_theta_upper: None,
        }
    }
}

/// One flagged bound violation with its location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundViolation {
    pub time: f64,
    pub check: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    pub value: f64,
}

/// Check one record against the pointwise bound conclusions: positive `v`
/// and `theta`, the phase-field maximum principle within `tol_phi`, and the
/// mean-temperature bracket when armed. Monitors report, never throw.
pub fn monitor_bounds(
    record: &DiagnosticsRecord,
    bracket: Option<&BoundBracket>,
    cfg: &MonitorConfig,
) -> Vec<BoundViolation> {
    let mut out = Vec::new();
    if !(record.min_v > 0.0) {
        out.push(BoundViolation {
            time: record.time,
            check: "v > 0".into(),
            index: Some(record.argmin_v),
            value: record.min_v,
        });
    }
    if !(record.min_theta > 0.0) {
        out.push(BoundViolation {
            time: record.time,
            check: "theta > 0".into(),
            index: Some(record.argmin_theta),
            value: record.min_theta,
        });
    }
    if !(record.min_phi >= -1.0 - cfg.tol_phi) {
        out.push(BoundViolation {
            time: record.time,
            check: "phi >= -1 - tol_phi".into(),
            index: Some(record.argmin_phi),
            value: record.min_phi,
        });
    }
    if !(record.max_phi <= 1.0 + cfg.tol_phi) {
        out.push(BoundViolation {
            time: record.time,
            check: "phi <= 1 + tol_phi".into(),
            index: Some(record.argmax_phi),
            value: record.max_phi,
        });
    }
    if let Some(b) = bracket {
        if !(record.mean_theta >= b.alpha1 - cfg.mean_theta_tol) {
            out.push(BoundViolation {
                time: record.time,
                check: "mean theta >= alpha1".into(),
                index: None,
                value: record.mean_theta,
            });
        }
    }
    if let Some(upper) = cfg.mean_theta_upper {
        if !(record.mean_theta <= upper + cfg.mean_theta_tol) {
            out.push(BoundViolation {
                time: record.time,
                check: "mean theta <= upper".into(),
                index: None,
                value: record.mean_theta,
            });
        }
    }
    out
}

/// Outcome of one field's three-grid comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrderVerdict {
    /// Observed order `log2(e_coarse / e_fine)`.
    Order(f64),
    /// Both differences vanish to roundoff.
    ExactlyPreserved,
    /// Non-monotone error triple.
    Indeterminate,
}

#[derive(Debug, Clone)]
pub struct FieldConvergence {
    pub field: &'static str,
    pub err_coarse: f64,
    pub err_fine: f64,
    pub verdict: OrderVerdict,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub fields: Vec<FieldConvergence>,
}

impl ConvergenceReport {
    /// True when every field either converges at the given order or is
    /// preserved exactly.
    pub fn all_orders_at_least(&self, p: f64) -> bool {
        self.fields.iter().all(|f| match f.verdict {
            OrderVerdict::Order(q) => q >= p,
            OrderVerdict::ExactlyPreserved => true,
            OrderVerdict::Indeterminate => false,
        })
    }
}

fn restrict_centers(fine: &[f64]) -> Vec<f64> {
    fine.chunks_exact(2).map(|c| 0.5 * (c[0] + c[1])).collect()
}

fn l1_centers(diff: impl Iterator<Item = f64>, dx: f64) -> f64 {
    compensated_sum(diff.map(f64::abs)) * dx
}

/// Observed self-convergence orders from solutions on three nested grids
/// `(N, 2N, 4N)`: fine solutions restrict to the coarse grid by cell
/// averaging (node injection for the velocity), differences are measured in
/// L1, and the order is the log2 ratio of successive differences.
pub fn self_convergence(
    coarse: &State,
    mid: &State,
    fine: &State,
) -> Result<ConvergenceReport> {
    let n = coarse.n_cells();
    if mid.n_cells() != 2 * n || fine.n_cells() != 4 * n {
        return Err(Error::ShapeMismatch {
            what: "self_convergence grids",
            expected: 2 * n,
            got: mid.n_cells(),
        });
    }
    let dxc = 1.0 / n as f64;
    let dxm = 1.0 / (2 * n) as f64;

    let center_errs = |get: fn(&State) -> &Vec<f64>| -> (f64, f64) {
        let rc = restrict_centers(get(mid));
        let e1 = l1_centers(
            get(coarse).iter().zip(&rc).map(|(&a, &b)| a - b),
            dxc,
        );
        let rf = restrict_centers(get(fine));
        let e2 = l1_centers(get(mid).iter().zip(&rf).map(|(&a, &b)| a - b), dxm);
        (e1, e2)
    };
    let node_errs = || -> (f64, f64) {
        let d1: Vec<f64> = (0..=n).map(|j| coarse.u[j] - mid.u[2 * j]).collect();
        let e1 = trapezoid_nodes(|j| d1[j].abs(), n + 1, dxc);
        let d2: Vec<f64> = (0..=2 * n).map(|j| mid.u[j] - fine.u[2 * j]).collect();
        let e2 = trapezoid_nodes(|j| d2[j].abs(), 2 * n + 1, dxm);
        (e1, e2)
    };

    let verdict = |e1: f64, e2: f64| -> OrderVerdict {
        let tiny = 1e-14;
        if e1 <= tiny && e2 <= tiny {
            OrderVerdict::ExactlyPreserved
        } else if e2 <= 0.0 || e1 <= e2 {
            OrderVerdict::Indeterminate
        } else {
            OrderVerdict::Order((e1 / e2).log2())
        }
    };

    let mut fields = Vec::new();
    for (name, errs) in [
        ("v", center_errs(|s: &State| &s.v)),
        ("u", node_errs()),
        ("theta", center_errs(|s: &State| &s.theta)),
        ("phi", center_errs(|s: &State| &s.phi)),
    ] {
        fields.push(FieldConvergence {
            field: name,
            err_coarse: errs.0,
            err_fine: errs.1,
            verdict: verdict(errs.0, errs.1),
        });
    }
    Ok(ConvergenceReport { fields })
}
