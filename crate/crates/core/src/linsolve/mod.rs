//! Sparse direct solvers: an inertia-revealing symmetric-indefinite LDLT
//! and an unsymmetric LU, both multifrontal over an approximate minimum
//! degree ordering.

mod ldlt;
mod lu;
mod sparse;
mod symbolic;

use serde::Serialize;
use thiserror::Error;

pub use ldlt::{LdltFactor, LdltSolver, PivotBlock};
pub use lu::{LuFactor, LuSolver};
pub use sparse::{CscMatrix, SparseSymmetric};

/// Pivots with magnitude at most this fraction of `max |A + tau I|` count as
/// zero eigenvalues.
pub const ZERO_PIVOT_REL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinsolveError {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("matrix pattern differs from the analysed pattern")]
    PatternMismatch,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid diagonal shift {0}")]
    InvalidShift(f64),
    #[error("factorization breakdown: {0}")]
    Breakdown(String),
    #[error("matrix is singular ({n_zero} zero pivot(s)); solve refused")]
    Singular { n_zero: usize },
    #[error("matrix is numerically singular at pivot {column}")]
    SingularPivot { column: usize },
}

/// Counts of positive, negative and zero eigenvalues.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Inertia {
    pub n_pos: usize,
    pub n_neg: usize,
    pub n_zero: usize,
}

impl Inertia {
    pub fn dim(&self) -> usize {
        self.n_pos + self.n_neg + self.n_zero
    }
}

/// One-shot analysis and factorization of `A + tau I`.
pub fn ldlt_factorize(a: &SparseSymmetric, tau: f64) -> Result<LdltFactor, LinsolveError> {
    LdltSolver::analyze(a)?.factorize(a, tau)
}

pub fn ldlt_solve(factor: &LdltFactor, b: &[f64]) -> Result<Vec<f64>, LinsolveError> {
    factor.solve(b)
}

/// One-shot sparse LU solve of `A x = b`.
pub fn lu_solve(a: &CscMatrix, b: &[f64]) -> Result<Vec<f64>, LinsolveError> {
    LuSolver::analyze(a)?.factorize(a)?.solve(b)
}
