//! Uniform displacement-controlled load stepping.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::{reaction_from_residual, Assembler, Mode, State};
use crate::mesh::{Component, DirichletMap};

use super::{
    modified_newton_step, quasi_monolithic_step, staggered_step, SolverConfig, SolverError, SolverKind, StepReport,
    Workspace,
};

/// A discretized boundary value problem ready for load stepping.
pub struct Problem<'a> {
    pub assembler: &'a Assembler,
    pub dirichlet: &'a DirichletMap,
    /// Nodes whose reaction is reported.
    pub reaction_nodes: Vec<usize>,
    pub reaction_component: Component,
    /// Total prescribed displacement of the loaded boundary (mm).
    pub total_displacement: f64,
    pub increments: usize,
    /// Keep stepping after a failed increment instead of stopping.
    pub continue_on_failure: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub increment: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub reports: Vec<StepReport>,
    pub state: State,
    pub failures: Vec<RunFailure>,
}

impl RunOutcome {
    pub fn completed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs `problem.increments` uniform increments from the undamaged,
/// unloaded state. `observer` sees every finished increment.
pub fn run_load_stepping(
    problem: &Problem,
    kind: SolverKind,
    cfg: &SolverConfig,
    mut observer: impl FnMut(&StepReport, &State),
) -> Result<RunOutcome, SolverError> {
    cfg.validate()?;
    if problem.increments == 0 {
        return Err(SolverError::InvalidConfig("at least one increment is required".into()));
    }
    let asm = problem.assembler;
    let mut ws = Workspace::new(asm, problem.dirichlet)?;
    let mut st = State::zeros(asm.n_nodes());
    let sign = if problem.total_displacement < 0.0 { -1.0 } else { 1.0 };
    let mut reports = Vec::with_capacity(problem.increments);
    let mut failures = Vec::new();
    for n in 1..=problem.increments {
        st.d_prev2.copy_from_slice(&st.d_prev);
        st.d_prev.copy_from_slice(&st.d);
        st.t_prev2 = st.t_prev;
        st.t_prev = st.t;
        st.t = n as f64 / problem.increments as f64;
        problem.dirichlet.impose(&mut st.u, st.t);

        let start = Instant::now();
        let result = match kind {
            SolverKind::Am => staggered_step(&mut ws, &mut st, cfg),
            SolverKind::Qm => quasi_monolithic_step(&mut ws, &mut st, cfg),
            SolverKind::Mn => modified_newton_step(&mut ws, &mut st, cfg),
        };
        let elapsed = start.elapsed().as_secs_f64();
        let mut rep = match result {
            Ok(rep) => rep,
            Err(e) => {
                log::error!("increment {n}: {e}");
                failures.push(RunFailure { increment: n, message: e.to_string() });
                let finite = st.u.iter().chain(&st.d).all(|v| v.is_finite());
                if !problem.continue_on_failure || !finite {
                    break;
                }
                StepReport::default()
            }
        };
        rep.increment = n;
        rep.applied_displacement = st.t * problem.total_displacement;
        rep.wall_time_s = elapsed;
        let r = asm.assemble_residual(&st, Mode::Full)?;
        rep.reaction = sign * reaction_from_residual(&r, &problem.reaction_nodes, problem.reaction_component);
        rep.min_damage_increment =
            st.d.iter().zip(&st.d_prev).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
        rep.max_damage = st.d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        log::info!(
            "increment {n}: u = {:.4e}, F = {:.4e}, iterations {}, ic {}, qm {}",
            rep.applied_displacement,
            rep.reaction,
            rep.iterations,
            rep.ic_iterations,
            rep.qm_corrections
        );
        observer(&rep, &st);
        reports.push(rep);
    }
    Ok(RunOutcome { reports, state: st, failures })
}
