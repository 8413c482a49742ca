//! Sparse matrices and the two SPD solvers used by every elliptic problem.

mod pcg;
mod skyline;
mod sparse;

pub use pcg::{pcg, IdentityPreconditioner, JacobiPreconditioner, LinearOperator, PcgStats, Preconditioner};
pub use skyline::SkylineCholesky;
pub use sparse::CsrMatrix;

use crate::error::{Error, Result};

/// Systems with fewer unknowns than this are factored directly.
pub const DIRECT_THRESHOLD: usize = 20000;

/// Relative residual target for the iterative path.
pub const PCG_TOL: f64 = 1e-12;

/// A symmetric positive definite system prepared for repeated solves.
#[derive(Clone, Debug)]
pub enum SpdSolver {
    Direct(SkylineCholesky),
    Iterative { matrix: CsrMatrix, jacobi: JacobiPreconditioner },
}

impl SpdSolver {
    /// Factors directly below [`DIRECT_THRESHOLD`] unknowns, otherwise
    /// prepares Jacobi-preconditioned CG.
    pub fn new(matrix: CsrMatrix) -> Result<Self> {
        if matrix.n() < DIRECT_THRESHOLD {
            Self::direct(&matrix)
        } else {
            Ok(Self::iterative(matrix))
        }
    }

    pub fn direct(matrix: &CsrMatrix) -> Result<Self> {
        Ok(SpdSolver::Direct(SkylineCholesky::factor(matrix)?))
    }

    pub fn iterative(matrix: CsrMatrix) -> Self {
        let jacobi = JacobiPreconditioner::new(&matrix.diagonal());
        SpdSolver::Iterative { matrix, jacobi }
    }

    pub fn n(&self) -> usize {
        match self {
            SpdSolver::Direct(c) => c.n(),
            SpdSolver::Iterative { matrix, .. } => matrix.n(),
        }
    }

    pub fn is_direct(&self) -> bool {
        matches!(self, SpdSolver::Direct(_))
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n() {
            return Err(Error::Usage(format!("right-hand side has length {}, system has {}", b.len(), self.n())));
        }
        match self {
            SpdSolver::Direct(c) => Ok(c.solve(b)),
            SpdSolver::Iterative { matrix, jacobi } => {
                let mut x = vec![0.0; b.len()];
                let stats = pcg(matrix, jacobi, b, &mut x, PCG_TOL, 0.0, 20 * b.len() + 100);
                if !stats.converged {
                    return Err(Error::Solver(format!(
                        "CG stopped after {} iterations at relative residual {:.3e}",
                        stats.iterations, stats.relative_residual
                    )));
                }
                Ok(x)
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
