//! 1-D non-isentropic compressible Navier-Stokes/Allen-Cahn solver in
//! Lagrangian mass coordinates, with a verification harness that continuously
//! checks conservation laws, the entropy-dissipation balance, the
//! multiplicative representation of the specific volume, and pointwise
//! bounds.

pub mod config;
pub mod diagnostics;
pub mod driver;
pub mod error;
pub mod initial;
pub mod integrator;
pub mod kernels;
pub mod report;
pub mod state;
pub mod tridiag;

pub use error::{Error, Result};
pub use state::{Grid, Params, State};
