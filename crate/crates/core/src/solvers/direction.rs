//! Inertia-corrected Newton direction and the energy backtracking search.

use crate::assembly::{Assembler, Reduction, State};
use crate::linsolve::{LdltSolver, SparseSymmetric};

use super::{InertiaParams, SolverConfig, SolverError};

#[derive(Debug, Clone)]
pub struct Direction {
    pub delta: Vec<f64>,
    /// Shift used for the accepted factorization (zero if uncorrected).
    pub tau: f64,
    /// Every shift factorized, in order.
    pub trials: Vec<f64>,
}

impl Direction {
    pub fn factorizations(&self) -> usize {
        self.trials.len()
    }
}

/// Solves `(J + tau I) delta = -r` with the smallest shift of the schedule
/// that makes the shifted matrix positive definite.
pub fn inertia_corrected_direction(
    solver: &LdltSolver,
    j: &SparseSymmetric,
    r: &[f64],
    tau_prev: f64,
    ic: &InertiaParams,
) -> Result<Direction, SolverError> {
    let m = j.dim();
    let mut trials = Vec::new();
    let mut tau = 0.0;
    let mut factor = solver.factorize(j, tau)?;
    trials.push(tau);
    if factor.inertia().n_pos != m {
        tau = if tau_prev == 0.0 { ic.tau_bar } else { ic.tau_bar_min.max(ic.kappa_minus * tau_prev) };
        factor = solver.factorize(j, tau)?;
        trials.push(tau);
        while factor.inertia().n_pos != m {
            tau *= if tau_prev == 0.0 { ic.kappa_bar_plus } else { ic.kappa_plus };
            if !(tau <= ic.tau_max) {
                return Err(SolverError::TauOverflow { tau });
            }
            factor = solver.factorize(j, tau)?;
            trials.push(tau);
        }
    }
    let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
    let delta = factor.solve(&rhs)?;
    Ok(Direction { delta, tau, trials })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    pub alpha: f64,
    pub backtracks: usize,
    /// The cap was reached without an energy decrease.
    pub failed: bool,
}

/// Backtracking on `diff(alpha) = E(x + alpha delta) - E(x)`: contracts while
/// the energy increases.
pub fn backtrack<F>(mut diff: F, rho: f64, max_backtracks: usize) -> Result<LineSearch, SolverError>
where
    F: FnMut(f64) -> Result<f64, SolverError>,
{
    let mut alpha = 1.0;
    let mut i = 0;
    loop {
        let de = diff(alpha)?;
        if !(de > 0.0) && !de.is_nan() {
            return Ok(LineSearch { alpha, backtracks: i, failed: false });
        }
        if i == max_backtracks {
            return Ok(LineSearch { alpha, backtracks: i, failed: true });
        }
        alpha *= rho;
        i += 1;
    }
}

/// Adds `alpha * delta` (indexed by the free DOFs of `red`) to the stacked
/// unknowns of `st`.
pub(crate) fn apply_update(st: &mut State, red: &Reduction, alpha: f64, delta: &[f64]) {
    let nu = st.u.len();
    for (k, &i) in red.free().iter().enumerate() {
        if i < nu {
            st.u[i] += alpha * delta[k];
        } else {
            st.d[i - nu] += alpha * delta[k];
        }
    }
}

/// Energy backtracking along `delta` over the free DOFs of `red`; prescribed
/// DOFs keep their values.
pub fn armijo_backtrack(
    asm: &Assembler,
    st: &State,
    red: &Reduction,
    delta: &[f64],
    cfg: &SolverConfig,
) -> Result<LineSearch, SolverError> {
    let base = asm.element_energies(st)?;
    let mut trial = st.clone();
    backtrack(
        |alpha| {
            trial.u.copy_from_slice(&st.u);
            trial.d.copy_from_slice(&st.d);
            apply_update(&mut trial, red, alpha, delta);
            let e = asm.element_energies(&trial)?;
            Ok(e.iter().zip(&base).map(|(a, b)| a - b).sum())
        },
        cfg.rho,
        cfg.max_backtracks,
    )
}
