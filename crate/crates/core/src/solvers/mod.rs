//! Nonlinear solution schemes for one load increment and the load-stepping
//! driver.

mod direction;
mod driver;
mod schemes;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::AssemblyError;
use crate::linsolve::LinsolveError;

pub use direction::{armijo_backtrack, backtrack, inertia_corrected_direction, Direction, LineSearch};
pub use driver::{run_load_stepping, Problem, RunOutcome, RunFailure};
pub use schemes::{modified_newton_step, quasi_monolithic_step, staggered_step, Workspace};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Linear(#[from] LinsolveError),
    #[error("{scheme}: no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { scheme: &'static str, iterations: usize, residual: f64 },
    #[error("{scheme}: residual became non-finite after {iterations} iterations")]
    Diverged { scheme: &'static str, iterations: usize },
    #[error("inertia correction exceeded the shift ceiling ({tau:.3e})")]
    TauOverflow { tau: f64 },
}

/// Nonlinear scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Alternating minimization.
    Am,
    /// Quasi-monolithic with extrapolation correction loop.
    Qm,
    /// Modified Newton with inertia correction.
    Mn,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Am => "am",
            SolverKind::Qm => "qm",
            SolverKind::Mn => "mn",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "am" => Ok(SolverKind::Am),
            "qm" => Ok(SolverKind::Qm),
            "mn" => Ok(SolverKind::Mn),
            other => Err(format!("unknown solver '{other}' (expected am, qm or mn)")),
        }
    }
}

/// Shift schedule of the inertia correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InertiaParams {
    pub kappa_plus: f64,
    pub kappa_minus: f64,
    pub kappa_bar_plus: f64,
    pub tau_bar: f64,
    pub tau_bar_min: f64,
    /// Largest shift tried before giving up.
    pub tau_max: f64,
}

impl Default for InertiaParams {
    fn default() -> Self {
        InertiaParams {
            kappa_plus: 8.0,
            kappa_minus: 1.0 / 3.0,
            kappa_bar_plus: 100.0,
            tau_bar: 1e-4,
            tau_bar_min: 1e-20,
            tau_max: 1e40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Absolute tolerance on the infinity norm of the residual.
    pub tol: f64,
    /// Inner Newton tolerance of the alternating scheme.
    pub tol_in: f64,
    /// Euclidean tolerance of the extrapolation correction loop.
    pub tol_qm: f64,
    /// Line-search contraction factor.
    pub rho: f64,
    pub ic: InertiaParams,
    /// Cap on corrections per increment.
    pub max_newton_iters: usize,
    pub max_backtracks: usize,
    /// Zero gives the original quasi-monolithic scheme.
    pub max_qm_corrections: usize,
    /// Outer staggered iterations without improvement before a warning.
    pub stagnation_window: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-4,
            tol_in: 1e-5,
            tol_qm: 1e-2,
            rho: 0.5,
            ic: InertiaParams::default(),
            max_newton_iters: 100_000,
            max_backtracks: 60,
            max_qm_corrections: 500,
            stagnation_window: 200,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidConfig(m));
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if !(self.tol_in > 0.0 && self.tol_in < self.tol) {
            return bad(format!("tol_in must satisfy 0 < tol_in < tol, got {}", self.tol_in));
        }
        if !(self.tol_qm > 0.0 && self.tol_qm.is_finite()) {
            return bad(format!("tol_qm must be positive, got {}", self.tol_qm));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho must lie in (0, 1), got {}", self.rho));
        }
        let ic = &self.ic;
        if !(ic.kappa_plus > 1.0) {
            return bad(format!("kappa_plus must exceed 1, got {}", ic.kappa_plus));
        }
        if !(ic.kappa_minus > 0.0 && ic.kappa_minus < 1.0) {
            return bad(format!("kappa_minus must lie in (0, 1), got {}", ic.kappa_minus));
        }
        if !(ic.kappa_bar_plus > 1.0) {
            return bad(format!("kappa_bar_plus must exceed 1, got {}", ic.kappa_bar_plus));
        }
        if !(ic.tau_bar_min > 0.0 && ic.tau_bar > ic.tau_bar_min) {
            return bad(format!(
                "shifts must satisfy tau_bar > tau_bar_min > 0, got {} and {}",
                ic.tau_bar, ic.tau_bar_min
            ));
        }
        if !(ic.tau_max > ic.tau_bar) {
            return bad(format!("tau_max must exceed tau_bar, got {}", ic.tau_max));
        }
        if self.max_newton_iters == 0 {
            return bad("max_newton_iters must be positive".into());
        }
        Ok(())
    }
}

/// Outcome of one converged (or flagged) load increment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub increment: usize,
    pub applied_displacement: f64,
    /// Corrections made to the unknowns.
    pub iterations: usize,
    /// Iterations that used a positive shift.
    pub ic_iterations: usize,
    pub qm_corrections: usize,
    pub factorizations: usize,
    /// Line searches that hit the backtracking cap.
    pub backtrack_failures: usize,
    pub reaction: f64,
    pub wall_time_s: f64,
    pub residual_inf: f64,
    pub last_tau: f64,
    /// Smallest nodal `D - D_prev` of the increment.
    pub min_damage_increment: f64,
    pub max_damage: f64,
    /// Set when the correction loop stopped at its cap.
    pub qm_cap_reached: bool,
}

/// Linear extrapolation in pseudo-time from `(t1, d1)` and `(t2, d2)` to `t`,
/// with `t2 < t1`. Coincident times give the constant extrapolation `d1`.
pub fn extrapolate(d1: &[f64], d2: &[f64], t: f64, t1: f64, t2: f64) -> Vec<f64> {
    let dt = t1 - t2;
    if !(dt > 0.0) {
        return d1.to_vec();
    }
    let w1 = (t - t2) / dt;
    let w2 = (t - t1) / dt;
    d1.iter().zip(d2).map(|(a, b)| a * w1 - b * w2).collect()
}

pub(crate) fn norm_inf(v: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for x in v {
        if x.is_nan() {
            return f64::NAN;
        }
        m = m.max(x.abs());
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_steps_extrapolate_linearly() {
        let d = extrapolate(&[0.4, 1.0], &[0.1, 1.0], 0.3, 0.2, 0.1);
        assert!((d[0] - 0.7).abs() < 1e-15);
        assert!((d[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn startup_is_constant() {
        assert_eq!(extrapolate(&[0.2], &[0.0], 0.02, 0.0, 0.0), vec![0.2]);
    }

    #[test]
    fn default_config_is_valid() {
        SolverConfig::default().validate().unwrap();
    }

    #[test]
    fn invalid_configs() {
        let mut c = SolverConfig::default();
        c.rho = 1.5;
        assert!(c.validate().is_err());
        let mut c = SolverConfig::default();
        c.tol_in = 1e-3;
        assert!(c.validate().is_err());
        let mut c = SolverConfig::default();
        c.ic.tau_bar_min = 1.0;
        assert!(c.validate().is_err());
        let mut c = SolverConfig::default();
        c.ic.kappa_minus = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("MN".parse::<SolverKind>().unwrap(), SolverKind::Mn);
        assert!("newton".parse::<SolverKind>().is_err());
    }

    #[test]
    fn nan_propagates_through_norm() {
        assert!(norm_inf(&[1.0, f64::NAN, 2.0]).is_nan());
        assert_eq!(norm_inf(&[-3.0, 2.0]), 3.0);
    }
}
