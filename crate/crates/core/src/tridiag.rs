//! Thomas algorithm for the tridiagonal systems produced by the implicit
//! viscosity, phase-diffusion and heat-conduction solves.
//!
//! All three systems are strictly diagonally dominant M-matrices, so the
//! factorization needs no pivoting; a zero pivot is still reported rather
//! than propagated as NaN.

use crate::error::{Error, Result};

/// Tridiagonal matrix in banded storage: `sub` and `sup` hold the off
/// diagonals and are one shorter than `diag`.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 || sub.len() != n - 1 {
            return Err(Error::ShapeMismatch {
                what: "Tridiagonal sub",
                expected: n.saturating_sub(1),
                got: sub.len(),
            });
        }
        if sup.len() != n - 1 {
            return Err(Error::ShapeMismatch {
                what: "Tridiagonal sup",
                expected: n - 1,
                got: sup.len(),
            });
        }
        Ok(Tridiagonal { sub, diag, sup })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Matrix-vector product, used by the solve residual checks.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.sub[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.sup[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    /// Solve `A x = rhs` by forward elimination and back substitution.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        assert_eq!(rhs.len(), n, "rhs length must match matrix size");

        let mut c_prime = vec![0.0; n];
        let mut d_prime = vec![0.0; n];

        if self.diag[0] == 0.0 {
            return Err(Error::SingularSystem { row: 0 });
        }
        if n > 1 {
            c_prime[0] = self.sup[0] / self.diag[0];
        }
        d_prime[0] = rhs[0] / self.diag[0];

        for i in 1..n {
            let den = self.diag[i] - self.sub[i - 1] * c_prime[i - 1];
            if den == 0.0 {
                return Err(Error::SingularSystem { row: i });
            }
            if i + 1 < n {
                c_prime[i] = self.sup[i] / den;
            }
            d_prime[i] = (rhs[i] - self.sub[i - 1] * d_prime[i - 1]) / den;
        }

        let mut x = d_prime;
        for i in (0..n - 1).rev() {
            x[i] -= c_prime[i] * x[i + 1];
        }
        Ok(x)
    }
}
