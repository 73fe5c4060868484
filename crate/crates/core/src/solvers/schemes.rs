//! The three nonlinear schemes for a single load increment.
//!
//! Each step expects the prescribed displacements of the increment to be
//! written into the state already, and leaves the increment-level fields of
//! the report (increment index, load, reaction, timing) to the driver.

use crate::assembly::{Assembler, GeneralGather, Mode, Reduction, State, SymmetricGather};
use crate::linsolve::{CscMatrix, LdltSolver, LuSolver, SparseSymmetric};
use crate::mesh::DirichletMap;

use super::direction::apply_update;
use super::{armijo_backtrack, extrapolate, inertia_corrected_direction, norm_inf, SolverConfig, SolverError, StepReport};

/// Reductions, gathers and symbolic factorizations reused across the
/// iterations and increments of one run.
pub struct Workspace<'a> {
    asm: &'a Assembler,
    full: Reduction,
    disp: Reduction,
    damage: Reduction,
    full_sym: Option<(SymmetricGather, LdltSolver)>,
    disp_sym: Option<(SymmetricGather, LdltSolver)>,
    damage_sym: Option<(SymmetricGather, LdltSolver)>,
    full_gen: Option<(GeneralGather, LuSolver)>,
    /// Shift of the most recent modified Newton iteration.
    pub tau_prev: f64,
}

fn reduce_sym(
    slot: &mut Option<(SymmetricGather, LdltSolver)>,
    red: &Reduction,
    j: &SparseSymmetric,
) -> Result<(SparseSymmetric, LdltSolver), SolverError> {
    if slot.is_none() {
        let g = red.symmetric_gather(j);
        let s = LdltSolver::analyze(&g.apply(j))?;
        *slot = Some((g, s));
    }
    let (g, s) = slot.as_ref().expect("initialized above");
    Ok((g.apply(j), s.clone()))
}

impl<'a> Workspace<'a> {
    pub fn new(asm: &'a Assembler, dirichlet: &DirichletMap) -> Result<Self, SolverError> {
        let n = asm.n_dofs();
        let m = asm.n_nodes();
        let fixed = dirichlet.indices();
        let full = Reduction::new(n, &fixed)?;
        let disp_free: Vec<usize> = (0..2 * m).filter(|i| !dirichlet.contains(*i)).collect();
        let disp = Reduction::keeping(n, &disp_free)?;
        let damage_dofs: Vec<usize> = (2 * m..3 * m).collect();
        let damage = Reduction::keeping(n, &damage_dofs)?;
        Ok(Workspace {
            asm,
            full,
            disp,
            damage,
            full_sym: None,
            disp_sym: None,
            damage_sym: None,
            full_gen: None,
            tau_prev: 0.0,
        })
    }

    pub fn assembler(&self) -> &Assembler {
        self.asm
    }

    /// Free DOFs of the coupled system.
    pub fn full_reduction(&self) -> &Reduction {
        &self.full
    }

    fn reduce_general(&mut self, j: &CscMatrix) -> Result<(CscMatrix, LuSolver), SolverError> {
        if self.full_gen.is_none() {
            let g = self.full.general_gather(j);
            let s = LuSolver::analyze(&g.apply(j))?;
            self.full_gen = Some((g, s));
        }
        let (g, s) = self.full_gen.as_ref().expect("initialized above");
        Ok((g.apply(j), s.clone()))
    }
}

fn check(st: &State, asm: &Assembler) -> Result<(), SolverError> {
    let m = asm.n_nodes();
    if st.d.len() != m {
        return Err(crate::assembly::AssemblyError::DimensionMismatch {
            what: "damage vector",
            expected: m,
            found: st.d.len(),
        }
        .into());
    }
    Ok(())
}

/// Newton solve of one sub-problem (`disp` or `damage` reduction) to `tol_in`.
fn sub_newton(
    asm: &Assembler,
    red: &Reduction,
    slot: &mut Option<(SymmetricGather, LdltSolver)>,
    st: &mut State,
    cfg: &SolverConfig,
    rep: &mut StepReport,
) -> Result<(), SolverError> {
    loop {
        let (r, j) = asm.residual_and_jacobian(st)?;
        let rf = red.restrict(&r);
        let res = norm_inf(&rf);
        if res.is_nan() {
            return Err(SolverError::Diverged { scheme: "alternating minimization", iterations: rep.iterations });
        }
        if res <= cfg.tol_in {
            return Ok(());
        }
        if rep.iterations >= cfg.max_newton_iters {
            return Err(SolverError::NonConvergence {
                scheme: "alternating minimization",
                iterations: rep.iterations,
                residual: res,
            });
        }
        let (jr, solver) = reduce_sym(slot, red, &j)?;
        let factor = solver.factorize(&jr, 0.0)?;
        rep.factorizations += 1;
        let rhs: Vec<f64> = rf.iter().map(|v| -v).collect();
        let delta = factor.solve(&rhs)?;
        apply_update(st, red, 1.0, &delta);
        rep.iterations += 1;
    }
}

/// Alternating minimization: damage and displacement sub-problems are solved
/// in turn by Newton's method until the damage residual meets `tol`.
///
/// The outer loop is also entered when only the displacement residual
/// exceeds `tol`, which happens on the first pass of an increment because the
/// new boundary values leave the previous displacement out of equilibrium.
pub fn staggered_step(ws: &mut Workspace, st: &mut State, cfg: &SolverConfig) -> Result<StepReport, SolverError> {
    check(st, ws.asm)?;
    let asm = ws.asm;
    let m = asm.n_nodes();
    let mut rep = StepReport::default();
    let residuals = |st: &State, ws: &Workspace| -> Result<(f64, f64), SolverError> {
        let r = asm.assemble_residual(st, Mode::Full)?;
        let rd = norm_inf(&r[2 * m..]);
        let ru = norm_inf(&ws.disp.restrict(&r));
        Ok((rd, ru))
    };
    let (mut rd, ru) = residuals(st, ws)?;
    let mut enter = ru > cfg.tol;
    let mut best = rd;
    let mut since_best = 0usize;
    let mut warned = false;
    while rd > cfg.tol || enter || rd.is_nan() {
        if rd.is_nan() {
            return Err(SolverError::Diverged { scheme: "alternating minimization", iterations: rep.iterations });
        }
        enter = false;
        sub_newton(asm, &ws.damage, &mut ws.damage_sym, st, cfg, &mut rep)?;
        sub_newton(asm, &ws.disp, &mut ws.disp_sym, st, cfg, &mut rep)?;
        rd = residuals(st, ws)?.0;
        if rd < best {
            best = rd;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.stagnation_window && !warned {
                log::warn!(
                    "alternating minimization: damage residual has not decreased in {} outer iterations ({:.3e})",
                    since_best,
                    rd
                );
                warned = true;
            }
        }
    }
    let (rd, ru) = residuals(st, ws)?;
    rep.residual_inf = rd.max(ru);
    Ok(rep)
}

/// Newton on the extrapolated system to `tol`, with LU solves.
fn qm_newton(
    ws: &mut Workspace,
    st: &mut State,
    d_tilde: &[f64],
    cfg: &SolverConfig,
    rep: &mut StepReport,
) -> Result<f64, SolverError> {
    loop {
        let (r, j) = ws.asm.residual_and_general_jacobian(st, Mode::QuasiMonolithic(d_tilde))?;
        let rf = ws.full.restrict(&r);
        let res = norm_inf(&rf);
        if res.is_nan() {
            return Err(SolverError::Diverged { scheme: "quasi-monolithic", iterations: rep.iterations });
        }
        if res <= cfg.tol {
            return Ok(res);
        }
        if rep.iterations >= cfg.max_newton_iters {
            return Err(SolverError::NonConvergence { scheme: "quasi-monolithic", iterations: rep.iterations, residual: res });
        }
        let (jr, solver) = ws.reduce_general(&j)?;
        let factor = solver.factorize(&jr)?;
        rep.factorizations += 1;
        let rhs: Vec<f64> = rf.iter().map(|v| -v).collect();
        let delta = factor.solve(&rhs)?;
        apply_update(st, &ws.full, 1.0, &delta);
        rep.iterations += 1;
    }
}

fn euclid_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Quasi-monolithic step: the displacement equation is degraded with a
/// damage field extrapolated from the two previous increments. With
/// `max_qm_corrections > 0` the extrapolation is rebuilt from the two most
/// recent iterates until they agree to `tol_qm`; reaching the cap flags the
/// report instead of failing.
pub fn quasi_monolithic_step(
    ws: &mut Workspace,
    st: &mut State,
    cfg: &SolverConfig,
) -> Result<StepReport, SolverError> {
    check(st, ws.asm)?;
    let mut rep = StepReport::default();
    let (t, t1, t2) = (st.t, st.t_prev, st.t_prev2);
    let d_tilde = extrapolate(&st.d_prev, &st.d_prev2, t, t1, t2);
    rep.residual_inf = qm_newton(ws, st, &d_tilde, cfg, &mut rep)?;
    if cfg.max_qm_corrections == 0 {
        return Ok(rep);
    }
    let mut d_km1 = st.d_prev.clone();
    while euclid_dist(&st.d, &d_km1) > cfg.tol_qm {
        if rep.qm_corrections >= cfg.max_qm_corrections {
            log::warn!("quasi-monolithic: correction loop stopped at its cap of {}", cfg.max_qm_corrections);
            rep.qm_cap_reached = true;
            break;
        }
        let d_tilde = extrapolate(&st.d, &d_km1, t, t1, t2);
        d_km1.copy_from_slice(&st.d);
        rep.residual_inf = qm_newton(ws, st, &d_tilde, cfg, &mut rep)?;
        rep.qm_corrections += 1;
    }
    Ok(rep)
}

/// Modified Newton on the coupled system: inertia-corrected directions with
/// energy backtracking.
pub fn modified_newton_step(
    ws: &mut Workspace,
    st: &mut State,
    cfg: &SolverConfig,
) -> Result<StepReport, SolverError> {
    check(st, ws.asm)?;
    let asm = ws.asm;
    let mut rep = StepReport::default();
    loop {
        let (r, j) = asm.residual_and_jacobian(st)?;
        let rf = ws.full.restrict(&r);
        let res = norm_inf(&rf);
        if res.is_nan() {
            return Err(SolverError::Diverged { scheme: "modified Newton", iterations: rep.iterations });
        }
        if res <= cfg.tol {
            rep.residual_inf = res;
            rep.last_tau = ws.tau_prev;
            return Ok(rep);
        }
        if rep.iterations >= cfg.max_newton_iters {
            return Err(SolverError::NonConvergence { scheme: "modified Newton", iterations: rep.iterations, residual: res });
        }
        let (jr, solver) = reduce_sym(&mut ws.full_sym, &ws.full, &j)?;
        let dir = inertia_corrected_direction(&solver, &jr, &rf, ws.tau_prev, &cfg.ic)?;
        rep.factorizations += dir.factorizations();
        if dir.tau > 0.0 {
            rep.ic_iterations += 1;
        }
        ws.tau_prev = dir.tau;
        let ls = armijo_backtrack(asm, st, &ws.full, &dir.delta, cfg)?;
        if ls.failed {
            rep.backtrack_failures += 1;
        }
        apply_update(st, &ws.full, ls.alpha, &dir.delta);
        rep.iterations += 1;
    }
}
