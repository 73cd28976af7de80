//! Domain types: physical parameters, the Lagrangian mass grid, discrete
//! states, quadrature, norms, and validation of initial data.
//!
//! The spatial domain is the unit mass interval: total mass is normalized to
//! one, so cell width is exactly `1/n_cells`. Specific volume `v`, temperature
//! `theta` and the phase field `phi` live at cell centers; velocity `u` lives
//! at the `n_cells + 1` nodes with `u = 0` pinned at both boundary nodes.

use crate::error::{Error, Result};

/// Physical constants of the model. The reference normalization sets
/// `nu = gas_const = c_v = kappa_tilde = 1`; all remain overridable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    /// Interface thickness of the diffuse interface, > 0.
    pub epsilon: f64,
    /// Heat-conductivity exponent in `kappa(theta) = kappa_tilde * theta^beta`, > 0.
    pub beta: f64,
    /// Viscosity.
    pub nu: f64,
    /// Gas constant in `p = R * theta / v`.
    pub gas_const: f64,
    /// Specific heat at constant volume.
    pub c_v: f64,
    /// Conductivity prefactor.
    pub kappa_tilde: f64,
}

impl Params {
    pub fn new(epsilon: f64, beta: f64) -> Result<Self> {
        let params = Params {
            epsilon,
            beta,
            nu: 1.0,
            gas_const: 1.0,
            c_v: 1.0,
            kappa_tilde: 1.0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("epsilon", self.epsilon),
            ("beta", self.beta),
            ("nu", self.nu),
            ("gas_const", self.gas_const),
            ("c_v", self.c_v),
            ("kappa_tilde", self.kappa_tilde),
        ];
        for (name, value) in checks {
            if !(value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    constraint: "must be > 0",
                });
            }
        }
        Ok(())
    }
}

/// Uniform grid on the unit mass interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub n_cells: usize,
    pub dx: f64,
    /// Cell centers, `x_i = (i + 1/2) / N`.
    pub centers: Vec<f64>,
    /// Cell faces, `x_{i-1/2} = i / N`, including both boundary nodes.
    pub nodes: Vec<f64>,
}

/// Build the uniform Lagrangian mass grid with `n_cells >= 2` cells.
pub fn make_grid(n_cells: usize) -> Result<Grid> {
    if n_cells < 2 {
        return Err(Error::InvalidGrid { n_cells });
    }
    let dx = 1.0 / n_cells as f64;
    let centers = (0..n_cells).map(|i| (i as f64 + 0.5) * dx).collect();
    let nodes = (0..=n_cells).map(|i| i as f64 * dx).collect();
    Ok(Grid {
        n_cells,
        dx,
        centers,
        nodes,
    })
}

impl Grid {
    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    fn check_centers(&self, field: &[f64], what: &'static str) -> Result<()> {
        if field.len() != self.n_cells {
            return Err(Error::ShapeMismatch {
                what,
                expected: self.n_cells,
                got: field.len(),
            });
        }
        Ok(())
    }
}

/// Midpoint-rule integral of a cell-centered field over the unit interval.
///
/// The summation is Neumaier-compensated so the result is accurate to a few
/// ulps independent of `n_cells`; every `int . dx` in the diagnostics reduces
/// to this rule.
pub fn integrate(field: &[f64], grid: &Grid) -> Result<f64> {
    grid.check_centers(field, "integrate field")?;
    Ok(compensated_sum(field.iter().copied()) * grid.dx)
}

/// Neumaier (improved Kahan) compensated summation.
pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Trapezoidal integral of a node field (half weights at the boundary nodes).
pub(crate) fn trapezoid_nodes(values: impl Fn(usize) -> f64, n_nodes: usize, dx: f64) -> f64 {
    let last = n_nodes - 1;
    let inner = compensated_sum((1..last).map(&values));
    (inner + 0.5 * (values(0) + values(last))) * dx
}

/// One simulated time instant of the coupled system.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub time: f64,
    /// Specific volume at cell centers, positive.
    pub v: Vec<f64>,
    /// Velocity at nodes; `u[0] = u[N] = 0`.
    pub u: Vec<f64>,
    /// Absolute temperature at cell centers, positive.
    pub theta: Vec<f64>,
    /// Phase-field order parameter at cell centers.
    pub phi: Vec<f64>,
}

impl State {
    pub fn new(
        time: f64,
        v: Vec<f64>,
        u: Vec<f64>,
        theta: Vec<f64>,
        phi: Vec<f64>,
        grid: &Grid,
    ) -> Result<Self> {
        grid.check_centers(&v, "State v")?;
        grid.check_centers(&theta, "State theta")?;
        grid.check_centers(&phi, "State phi")?;
        if u.len() != grid.n_nodes() {
            return Err(Error::ShapeMismatch {
                what: "State u",
                expected: grid.n_nodes(),
                got: u.len(),
            });
        }
        Ok(State {
            time,
            v,
            u,
            theta,
            phi,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.v.len()
    }
}

/// One violated hypothesis of the initial-data validation.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub check: &'static str,
    pub index: usize,
    pub value: f64,
}

/// Result of checking a state against the well-posedness hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.ok() {
            writeln!(f, "initial data: ok")
        } else {
            writeln!(f, "initial data: {} violation(s)", self.violations.len())?;
            for v in &self.violations {
                writeln!(f, "  {}: index {} value {}", v.check, v.index, v.value)?;
            }
            Ok(())
        }
    }
}

/// Index and value of the minimum, treating NaN as worst.
fn worst_min(field: &[f64]) -> (usize, f64) {
    let mut idx = 0;
    let mut val = f64::INFINITY;
    for (i, &x) in field.iter().enumerate() {
        if x.is_nan() {
            return (i, x);
        }
        if x < val {
            idx = i;
            val = x;
        }
    }
    (idx, val)
}

/// Check a state against the hypotheses required for well-posedness:
/// positive specific volume and temperature, phase field within `[-1, 1]`,
/// and zero boundary velocity. Violations are reported, never thrown.
pub fn validate_initial_data(state: &State, _params: &Params) -> ValidationReport {
    let mut violations = Vec::new();

    let (iv, mv) = worst_min(&state.v);
    if !(mv > 0.0) {
        violations.push(Violation {
            check: "inf v0 > 0",
            index: iv,
            value: mv,
        });
    }
    let (it, mt) = worst_min(&state.theta);
    if !(mt > 0.0) {
        violations.push(Violation {
            check: "inf theta0 > 0",
            index: it,
            value: mt,
        });
    }

    let mut worst_phi: Option<(usize, f64)> = None;
    for (i, &p) in state.phi.iter().enumerate() {
        let excess = p.abs() - 1.0;
        if !(excess <= 0.0) {
            let replace = match worst_phi {
                Some((_, w)) => !(p.abs() <= w.abs()),
                None => true,
            };
            if replace {
                worst_phi = Some((i, p));
            }
        }
    }
    if let Some((i, p)) = worst_phi {
        violations.push(Violation {
            check: "phi0 in [-1,1]",
            index: i,
            value: p,
        });
    }

    let last = state.u.len() - 1;
    for i in [0, last] {
        if state.u[i] != 0.0 {
            violations.push(Violation {
                check: "u0 boundary zero",
                index: i,
                value: state.u[i],
            });
        }
    }

    ValidationReport { violations }
}

/// A mass-normalized state together with the reported (not forced) value of
/// the conserved total-energy integral.
#[derive(Debug, Clone)]
pub struct NormalizedInitial {
    pub state: State,
    pub total_energy: f64,
}

/// Rescale `v` so that the total mass integral is exactly one.
///
/// When the mass is already within a few ulps of one the state is returned
/// unchanged, which makes the operation bitwise idempotent. The total energy
/// is reported, not rescaled (only mass normalization is forced here).
pub fn normalize_initial_data(state: &State, params: &Params, grid: &Grid) -> Result<NormalizedInitial> {
    let mass = integrate(&state.v, grid)?;
    if !(mass > 0.0) {
        return Err(Error::NonPositive {
            field: "total mass",
            index: 0,
            value: mass,
        });
    }
    let mut out = state.clone();
    if (mass - 1.0).abs() > 16.0 * f64::EPSILON {
        for v in &mut out.v {
            *v /= mass;
        }
    }
    let total_energy = crate::diagnostics::conserved_quantities(&out, params, grid)?.energy;
    Ok(NormalizedInitial {
        state: out,
        total_energy,
    })
}

/// L2 norms of all four fields and forward-difference H1 seminorms of the
/// cell-centered ones. Boundary ghost directions contribute zero, matching
/// the homogeneous Neumann discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteNorms {
    pub l2_v: f64,
    pub l2_u: f64,
    pub l2_theta: f64,
    pub l2_phi: f64,
    pub h1_v: f64,
    pub h1_theta: f64,
    pub h1_phi: f64,
}

pub fn discrete_norms(state: &State, grid: &Grid) -> Result<DiscreteNorms> {
    let l2_center = |f: &[f64]| -> Result<f64> {
        let sq: Vec<f64> = f.iter().map(|x| x * x).collect();
        Ok(integrate(&sq, grid)?.sqrt())
    };
    let h1_seminorm = |f: &[f64]| -> f64 {
        let sum = compensated_sum((1..f.len()).map(|i| {
            let d = (f[i] - f[i - 1]) / grid.dx;
            d * d
        }));
        (sum * grid.dx).sqrt()
    };
    let l2_u = trapezoid_nodes(|j| state.u[j] * state.u[j], grid.n_nodes(), grid.dx).sqrt();
    Ok(DiscreteNorms {
        l2_v: l2_center(&state.v)?,
        l2_u,
        l2_theta: l2_center(&state.theta)?,
        l2_phi: l2_center(&state.phi)?,
        h1_v: h1_seminorm(&state.v),
        h1_theta: h1_seminorm(&state.theta),
        h1_phi: h1_seminorm(&state.phi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn equilibrium(grid: &Grid) -> State {
        State {
            time: 0.0,
            v: vec![1.0; grid.n_cells],
            u: vec![0.0; grid.n_nodes()],
            theta: vec![1.0; grid.n_cells],
            phi: vec![1.0; grid.n_cells],
        }
    }

    #[test]
    fn grid_of_four() {
        let g = make_grid(4).unwrap();
        assert_eq!(g.dx, 0.25);
        assert_eq!(g.centers, vec![0.125, 0.375, 0.625, 0.875]);
        assert_eq!(g.nodes.len(), 5);
    }

    #[test]
    fn degenerate_grid_rejected() {
        assert!(make_grid(1).is_err());
        assert!(make_grid(0).is_err());
    }

    #[test]
    fn grid_512() {
        let g = make_grid(512).unwrap();
        assert_eq!(g.dx, 1.0 / 512.0);
        assert_eq!(g.nodes.len(), 513);
    }

    #[test]
    fn dx_times_n_within_machine_precision_up_to_2_pow_20() {
        // dx*N == 1 exactly is unattainable in binary64 for some N (e.g. 237:
        // no representable dx makes the product round to 1), so the invariant
        // is machine precision: within one ulp of 1 for every N, exact for
        // powers of two. Checked exhaustively.
        for n in 2..=(1usize << 20) {
            let dx = 1.0 / n as f64;
            let p = dx * n as f64;
            assert!((p - 1.0).abs() <= f64::EPSILON, "N = {n}: {p:e}");
            if n.is_power_of_two() {
                assert_eq!(p, 1.0, "power-of-two N = {n}");
            }
        }
    }

    #[test]
    fn integrate_constants() {
        for n in [2, 3, 4, 5, 7, 49, 64, 513] {
            let g = make_grid(n).unwrap();
            let one = integrate(&vec![1.0; n], &g).unwrap();
            assert!((one - 1.0).abs() <= f64::EPSILON, "N = {n}: {one:e}");
            if n.is_power_of_two() {
                assert_eq!(one, 1.0);
            }
            assert_eq!(integrate(&vec![0.0; n], &g).unwrap(), 0.0, "N = {n}");
        }
    }

    #[test]
    fn integrate_linear_field_exact() {
        // Midpoint rule is exact for linear integrands: int_0^1 x dx = 1/2.
        let g = make_grid(4).unwrap();
        assert_eq!(integrate(&g.centers, &g).unwrap(), 0.5);
    }

    #[test]
    fn integrate_shape_error() {
        let g = make_grid(4).unwrap();
        assert!(integrate(&[1.0; 3], &g).is_err());
    }

    #[test]
    fn validate_equilibrium_ok() {
        let params = Params::new(0.1, 1.0).unwrap();
        for n in [2, 16, 64, 257] {
            let g = make_grid(n).unwrap();
            let report = validate_initial_data(&equilibrium(&g), &params);
            assert!(report.ok(), "N = {n}: {report}");
        }
    }

    #[test]
    fn validate_flags_each_hypothesis() {
        let params = Params::new(0.1, 1.0).unwrap();
        let g = make_grid(8).unwrap();

        let mut s = equilibrium(&g);
        s.v[3] = 0.0;
        let r = validate_initial_data(&s, &params);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].check, "inf v0 > 0");
        assert_eq!(r.violations[0].index, 3);

        let mut s = equilibrium(&g);
        s.theta[5] = -0.2;
        let r = validate_initial_data(&s, &params);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].check, "inf theta0 > 0");
        assert_eq!(r.violations[0].index, 5);

        let mut s = equilibrium(&g);
        s.phi[2] = 1.5;
        let r = validate_initial_data(&s, &params);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].check, "phi0 in [-1,1]");
        assert_eq!(r.violations[0].index, 2);
        assert_eq!(r.violations[0].value, 1.5);

        let mut s = equilibrium(&g);
        s.u[0] = 1e-3;
        let r = validate_initial_data(&s, &params);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].check, "u0 boundary zero");
        assert_eq!(r.violations[0].index, 0);
    }

    #[test]
    fn phi_boundary_values_allowed() {
        let params = Params::new(0.1, 1.0).unwrap();
        let g = make_grid(4).unwrap();
        let mut s = equilibrium(&g);
        s.phi = vec![-1.0, 1.0, -1.0, 1.0];
        assert!(validate_initial_data(&s, &params).ok());
    }

    #[test]
    fn normalize_rescales_mass() {
        let params = Params::new(0.1, 1.0).unwrap();
        let g = make_grid(8).unwrap();
        let mut s = equilibrium(&g);
        s.v = vec![2.0; 8];
        let n = normalize_initial_data(&s, &params, &g).unwrap();
        assert_eq!(n.state.v, vec![1.0; 8]);
    }

    #[test]
    fn normalize_idempotent_bitwise() {
        let params = Params::new(0.1, 1.0).unwrap();
        let g = make_grid(256).unwrap();
        let mut s = equilibrium(&g);
        for (i, v) in s.v.iter_mut().enumerate() {
            *v = 1.0 + 0.5 * (2.0 * std::f64::consts::PI * g.centers[i]).sin();
        }
        let once = normalize_initial_data(&s, &params, &g).unwrap();
        let mass_once = integrate(&once.state.v, &g).unwrap();
        assert!(
            (mass_once - 1.0).abs() <= 1e-14,
            "mass after normalization: {mass_once}"
        );
        let twice = normalize_initial_data(&once.state, &params, &g).unwrap();
        assert_eq!(once.state.v, twice.state.v);
    }

    #[test]
    fn norms_of_simple_fields() {
        let g = make_grid(512).unwrap();
        let s = equilibrium(&g);
        let n = discrete_norms(&s, &g).unwrap();
        assert_eq!(n.l2_theta, 1.0);
        assert_eq!(n.h1_theta, 0.0);
        assert_eq!(n.l2_u, 0.0);
    }

    #[test]
    fn l2_of_cosine() {
        // int_0^1 cos^2(pi x) dx = 1/2.
        let g = make_grid(512).unwrap();
        let mut s = equilibrium(&g);
        for (i, p) in s.phi.iter_mut().enumerate() {
            *p = (std::f64::consts::PI * g.centers[i]).cos();
        }
        let n = discrete_norms(&s, &g).unwrap();
        assert!((n.l2_phi * n.l2_phi - 0.5).abs() < 1e-4);
    }
}
