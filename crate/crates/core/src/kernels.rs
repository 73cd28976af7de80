//! Pointwise and stencil evaluation of the spatial terms of the Lagrangian
//! system: chemical potential, pressure, capillary stress, viscous stress
//! ingredients, degenerate heat flux, and the Eulerian/Lagrangian coordinate
//! maps.
//!
//! Staggering conventions used throughout:
//! - cell `c` owns nodes `c` (left) and `c + 1` (right);
//! - gradients of center fields live at nodes, `(f[c] - f[c-1]) / dx`;
//! - the velocity divergence lives at centers, `(u[c+1] - u[c]) / dx`;
//! - face values of `v` and `theta` are arithmetic means of the adjacent
//!   centers, and `kappa` is evaluated on the averaged face temperature;
//! - homogeneous Neumann boundaries zero the gradient at nodes `0` and `N`,
//!   which makes the discrete zero-net-heat identity exact.

use crate::error::{Error, Result};
use crate::state::{Grid, Params, State};

/// Values at the `n_cells + 1` nodes (gradients, fluxes, velocity-like).
#[derive(Debug, Clone, PartialEq)]
pub struct NodeField {
    pub values: Vec<f64>,
}

impl NodeField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Cell-centered values of the effective stress
/// `sigma = nu u_x / v - R theta / v - (eps/2) phi_x^2 / v^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaField {
    pub values: Vec<f64>,
}

/// Paired samples of Eulerian position and Lagrangian mass coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateMap {
    pub x_tilde: Vec<f64>,
    pub x_mass: Vec<f64>,
}

/// Boundary treatment for node gradients of a center field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientBc {
    /// Zero gradient at both boundary nodes.
    Neumann,
    /// Known boundary value; one-sided difference over the half cell.
    DirichletValue(f64),
}

fn check_positive(field: &[f64], name: &'static str) -> Result<()> {
    for (i, &x) in field.iter().enumerate() {
        if !(x > 0.0) {
            return Err(Error::NonPositive {
                field: name,
                index: i,
                value: x,
            });
        }
    }
    Ok(())
}

fn check_len(field: &[f64], expected: usize, what: &'static str) -> Result<()> {
    if field.len() != expected {
        return Err(Error::ShapeMismatch {
            what,
            expected,
            got: field.len(),
        });
    }
    Ok(())
}

/// Gradient of a cell-centered field at the nodes.
pub fn grad_at_nodes(field: &[f64], grid: &Grid, bc: GradientBc) -> Result<NodeField> {
    check_len(field, grid.n_cells, "grad_at_nodes field")?;
    let n = grid.n_cells;
    let dx = grid.dx;
    let mut values = vec![0.0; n + 1];
    for j in 1..n {
        values[j] = (field[j] - field[j - 1]) / dx;
    }
    if let GradientBc::DirichletValue(g) = bc {
        values[0] = (field[0] - g) / (0.5 * dx);
        values[n] = (g - field[n - 1]) / (0.5 * dx);
    }
    Ok(NodeField { values })
}

/// Node values of `phi_x / v` with face-averaged `v` and zero boundary flux.
fn phase_flux(phi: &[f64], v: &[f64], grid: &Grid) -> Vec<f64> {
    let n = grid.n_cells;
    let dx = grid.dx;
    let mut s = vec![0.0; n + 1];
    for j in 1..n {
        let g = (phi[j] - phi[j - 1]) / dx;
        s[j] = g / (0.5 * (v[j - 1] + v[j]));
    }
    s
}

/// Chemical potential `mu = (phi^3 - phi)/eps - eps (phi_x / v)_x`.
pub fn chemical_potential(phi: &[f64], v: &[f64], params: &Params, grid: &Grid) -> Result<Vec<f64>> {
    check_len(phi, grid.n_cells, "chemical_potential phi")?;
    check_len(v, grid.n_cells, "chemical_potential v")?;
    check_positive(v, "v")?;
    let eps = params.epsilon;
    let dx = grid.dx;
    let s = phase_flux(phi, v, grid);
    let mu = (0..grid.n_cells)
        .map(|c| (phi[c] * phi[c] * phi[c] - phi[c]) / eps - eps * ((s[c + 1] - s[c]) / dx))
        .collect();
    Ok(mu)
}

/// Ideal-gas pressure `R theta / v` at cell centers.
pub fn pressure(v: &[f64], theta: &[f64], params: &Params) -> Result<Vec<f64>> {
    check_len(theta, v.len(), "pressure theta")?;
    check_positive(v, "v")?;
    Ok(v.iter()
        .zip(theta)
        .map(|(&vi, &ti)| params.gas_const * ti / vi)
        .collect())
}

/// Capillary stress `(eps/2) phi_x^2 / v^2` at cell centers: squared node
/// gradients averaged to the center, divided by the center `v^2`.
pub fn capillary_stress(phi: &[f64], v: &[f64], params: &Params, grid: &Grid) -> Result<Vec<f64>> {
    check_len(phi, grid.n_cells, "capillary_stress phi")?;
    check_len(v, grid.n_cells, "capillary_stress v")?;
    check_positive(v, "v")?;
    let g = grad_at_nodes(phi, grid, GradientBc::Neumann)?.values;
    let eps = params.epsilon;
    Ok((0..grid.n_cells)
        .map(|c| {
            let gsq = 0.5 * (g[c] * g[c] + g[c + 1] * g[c + 1]);
            0.5 * eps * gsq / (v[c] * v[c])
        })
        .collect())
}

/// Squared node gradients of `phi` averaged to centers; shared by the energy
/// and entropy functionals, which integrate `phi_x^2 / v` with center `v`.
pub fn phi_gradsq_at_centers(phi: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    let g = grad_at_nodes(phi, grid, GradientBc::Neumann)?.values;
    Ok((0..grid.n_cells)
        .map(|c| 0.5 * (g[c] * g[c] + g[c + 1] * g[c + 1]))
        .collect())
}

/// Degenerate heat flux `q = kappa_tilde theta^beta theta_x / v` at nodes,
/// zero at the insulated boundaries.
pub fn heat_flux(theta: &[f64], v: &[f64], params: &Params, grid: &Grid) -> Result<NodeField> {
    check_len(theta, grid.n_cells, "heat_flux theta")?;
    check_len(v, grid.n_cells, "heat_flux v")?;
    check_positive(theta, "theta")?;
    check_positive(v, "v")?;
    let n = grid.n_cells;
    let dx = grid.dx;
    let mut q = vec![0.0; n + 1];
    for j in 1..n {
        let tf = 0.5 * (theta[j - 1] + theta[j]);
        let vf = 0.5 * (v[j - 1] + v[j]);
        q[j] = params.kappa_tilde * tf.powf(params.beta) * ((theta[j] - theta[j - 1]) / dx) / vf;
    }
    Ok(NodeField { values: q })
}

/// Velocity divergence `u_x` at cell centers.
pub fn velocity_divergence(u: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    check_len(u, grid.n_nodes(), "velocity_divergence u")?;
    Ok((0..grid.n_cells)
        .map(|c| (u[c + 1] - u[c]) / grid.dx)
        .collect())
}

/// Effective stress at cell centers.
pub fn sigma_field(state: &State, params: &Params, grid: &Grid) -> Result<SigmaField> {
    let p = pressure(&state.v, &state.theta, params)?;
    let cap = capillary_stress(&state.phi, &state.v, params, grid)?;
    let ux = velocity_divergence(&state.u, grid)?;
    let values = (0..grid.n_cells)
        .map(|c| params.nu * ux[c] / state.v[c] - p[c] - cap[c])
        .collect();
    Ok(SigmaField { values })
}

/// Lagrangian mass coordinate from Eulerian density samples: the cumulative
/// trapezoidal integral of `rho0` over `x_tilde`.
pub fn lagrangian_coordinate(x_tilde: &[f64], rho0: &[f64]) -> Result<CoordinateMap> {
    check_len(rho0, x_tilde.len(), "lagrangian_coordinate rho0")?;
    if x_tilde.len() < 2 {
        return Err(Error::ShapeMismatch {
            what: "lagrangian_coordinate x_tilde",
            expected: 2,
            got: x_tilde.len(),
        });
    }
    check_positive(rho0, "rho0")?;
    for j in 1..x_tilde.len() {
        if x_tilde[j] <= x_tilde[j - 1] {
            return Err(Error::NotIncreasing { index: j });
        }
    }
    let mut x_mass = vec![0.0; x_tilde.len()];
    for j in 1..x_tilde.len() {
        x_mass[j] =
            x_mass[j - 1] + 0.5 * (rho0[j - 1] + rho0[j]) * (x_tilde[j] - x_tilde[j - 1]);
    }
    let total = *x_mass.last().unwrap();
    let tol = 1e-10;
    if (total - 1.0).abs() > tol {
        return Err(Error::UnnormalizedDensity { total, tol });
    }
    Ok(CoordinateMap {
        x_tilde: x_tilde.to_vec(),
        x_mass,
    })
}

/// Eulerian node positions from the specific volume:
/// `x_tilde[j] = sum_{c < j} v[c] dx`, strictly increasing for `v > 0`.
pub fn eulerian_positions(state: &State, grid: &Grid) -> Result<NodeField> {
    check_positive(&state.v, "v")?;
    let mut x = vec![0.0; grid.n_nodes()];
    for c in 0..grid.n_cells {
        x[c + 1] = x[c] + state.v[c] * grid.dx;
    }
    Ok(NodeField { values: x })
}
