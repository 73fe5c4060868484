//! Global assembly of the coupled displacement/damage system.
//!
//! Unknowns are numbered with interleaved displacements first
//! (`2a`, `2a + 1` for node `a`) followed by damage (`2m + a`). Every
//! assembled quantity includes the out-of-plane thickness, so the residual is
//! exactly the gradient of [`Assembler::total_energy`].

mod kernel;
mod pattern;
mod reduction;

use std::sync::OnceLock;

use rayon::prelude::*;
use thiserror::Error;

use crate::constitutive::MaterialParams;
use crate::linsolve::{CscMatrix, SparseSymmetric};
use crate::mesh::quad4::{self, PointData};
use crate::mesh::{Component, Mesh, MeshError};

use kernel::{ElementFields, ElementOut, Want, NLOC};
use pattern::{build_pattern, element_dofs, scatter_table, Pattern};

pub use reduction::{apply_dirichlet_reduction, GeneralGather, Reduction, SymmetricGather};

/// Elements processed per parallel batch before the serial scatter.
const CHUNK: usize = 2048;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("{what}: expected length {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    #[error("dof {dof} out of range for a system of size {n}")]
    DofOutOfRange { dof: usize, n: usize },
    #[error("element {0} has a non-positive Jacobian determinant")]
    InvalidElement(usize),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Nodal unknowns of one load increment together with the history fields.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Vec<f64>,
    pub d: Vec<f64>,
    pub d_prev: Vec<f64>,
    pub d_prev2: Vec<f64>,
    pub t: f64,
    pub t_prev: f64,
    pub t_prev2: f64,
}

impl State {
    pub fn zeros(n_nodes: usize) -> Self {
        State {
            u: vec![0.0; 2 * n_nodes],
            d: vec![0.0; n_nodes],
            d_prev: vec![0.0; n_nodes],
            d_prev2: vec![0.0; n_nodes],
            t: 0.0,
            t_prev: 0.0,
            t_prev2: 0.0,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.d.len()
    }

    /// Stacked unknown vector `[U, D]`.
    pub fn stacked(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.u.len() + self.d.len());
        x.extend_from_slice(&self.u);
        x.extend_from_slice(&self.d);
        x
    }

    pub fn set_stacked(&mut self, x: &[f64]) {
        let nu = self.u.len();
        self.u.copy_from_slice(&x[..nu]);
        self.d.copy_from_slice(&x[nu..]);
    }

    fn check(&self, n_nodes: usize) -> Result<(), AssemblyError> {
        let checks = [
            ("displacement vector", 2 * n_nodes, self.u.len()),
            ("damage vector", n_nodes, self.d.len()),
            ("previous damage vector", n_nodes, self.d_prev.len()),
            ("second previous damage vector", n_nodes, self.d_prev2.len()),
        ];
        for (what, expected, found) in checks {
            if expected != found {
                return Err(AssemblyError::DimensionMismatch { what, expected, found });
            }
        }
        Ok(())
    }
}

/// Which residual is assembled.
#[derive(Debug, Clone, Copy)]
pub enum Mode<'a> {
    Full,
    /// Displacement degradation evaluated with the given extrapolated field.
    QuasiMonolithic(&'a [f64]),
}

/// Precomputed geometry, sparsity pattern and scatter maps of a mesh.
pub struct Assembler {
    n_nodes: usize,
    thickness: f64,
    elements: Vec<[usize; 4]>,
    sets: std::collections::BTreeMap<String, Vec<usize>>,
    points: Vec<[PointData; 4]>,
    material: MaterialParams,
    lower: Pattern,
    lower_scatter: Vec<[u32; NLOC * NLOC]>,
    general: OnceLock<(Pattern, Vec<[u32; NLOC * NLOC]>)>,
}

impl Assembler {
    pub fn new(mesh: &Mesh, material: MaterialParams) -> Result<Self, AssemblyError> {
        let mut points = Vec::with_capacity(mesh.n_elements());
        for e in 0..mesh.n_elements() {
            points.push(quad4::point_data(&mesh.element_coords(e)).ok_or(AssemblyError::InvalidElement(e))?);
        }
        let n = mesh.n_nodes();
        let lower = build_pattern(&mesh.elements, n, true);
        let lower_scatter = scatter_table(&lower, &mesh.elements, n, true);
        Ok(Assembler {
            n_nodes: n,
            thickness: mesh.thickness,
            elements: mesh.elements.clone(),
            sets: mesh.boundary_sets.clone(),
            points,
            material,
            lower,
            lower_scatter,
            general: OnceLock::new(),
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_dofs(&self) -> usize {
        3 * self.n_nodes
    }

    pub fn material(&self) -> &MaterialParams {
        &self.material
    }

    pub fn thickness(&self) -> f64 {
        self.thickness
    }

    fn general(&self) -> &(Pattern, Vec<[u32; NLOC * NLOC]>) {
        self.general.get_or_init(|| {
            let p = build_pattern(&self.elements, self.n_nodes, false);
            let s = scatter_table(&p, &self.elements, self.n_nodes, false);
            (p, s)
        })
    }

    fn fields(&self, e: usize, st: &State, mode: Mode) -> ElementFields {
        let conn = &self.elements[e];
        let mut f = ElementFields { u: [0.0; 8], d: [0.0; 4], d_prev: [0.0; 4], d_tilde: None };
        for a in 0..4 {
            f.u[2 * a] = st.u[2 * conn[a]];
            f.u[2 * a + 1] = st.u[2 * conn[a] + 1];
            f.d[a] = st.d[conn[a]];
            f.d_prev[a] = st.d_prev[conn[a]];
        }
        if let Mode::QuasiMonolithic(dt) = mode {
            let mut t = [0.0; 4];
            for a in 0..4 {
                t[a] = dt[conn[a]];
            }
            f.d_tilde = Some(t);
        }
        f
    }

    fn check(&self, st: &State, mode: Mode) -> Result<(), AssemblyError> {
        st.check(self.n_nodes)?;
        if let Mode::QuasiMonolithic(dt) = mode {
            if dt.len() != self.n_nodes {
                return Err(AssemblyError::DimensionMismatch {
                    what: "extrapolated damage",
                    expected: self.n_nodes,
                    found: dt.len(),
                });
            }
        }
        Ok(())
    }

    /// Runs the element kernel over all elements in parallel batches and
    /// hands each result to `sink` in element order.
    fn for_each_element(&self, st: &State, mode: Mode, want: Want, mut sink: impl FnMut(usize, &ElementOut)) {
        let ne = self.elements.len();
        let mut buf: Vec<ElementOut> = Vec::new();
        let mut start = 0;
        while start < ne {
            let end = (start + CHUNK).min(ne);
            (start..end)
                .into_par_iter()
                .map(|e| {
                    let mut out = ElementOut::default();
                    kernel::element(
                        &self.points[e],
                        &self.fields(e, st, mode),
                        &self.material,
                        self.thickness,
                        want,
                        &mut out,
                    );
                    out
                })
                .collect_into_vec(&mut buf);
            for (k, out) in buf.iter().enumerate() {
                sink(start + k, out);
            }
            start = end;
        }
    }

    fn scatter_residual(&self, e: usize, out: &ElementOut, r: &mut [f64]) {
        let g = element_dofs(&self.elements[e], self.n_nodes);
        for p in 0..NLOC {
            r[g[p]] += out.r[p];
        }
    }

    fn scatter_lower(&self, e: usize, out: &ElementOut, vals: &mut [f64]) {
        let g = element_dofs(&self.elements[e], self.n_nodes);
        let t = &self.lower_scatter[e];
        for p in 0..NLOC {
            for q in 0..NLOC {
                if g[p] >= g[q] {
                    vals[t[p * NLOC + q] as usize] += out.k[p][q];
                }
            }
        }
    }

    fn lower_matrix(&self, vals: Vec<f64>) -> SparseSymmetric {
        SparseSymmetric::new(self.n_dofs(), self.lower.col_ptr.clone(), self.lower.row_idx.clone(), vals)
            .expect("assembled pattern is valid")
    }

    /// Stacked residual `[R_u, R_d]`.
    pub fn assemble_residual(&self, st: &State, mode: Mode) -> Result<Vec<f64>, AssemblyError> {
        self.check(st, mode)?;
        let mut r = vec![0.0; self.n_dofs()];
        let want = Want { residual: true, jacobian: false, energy: false };
        self.for_each_element(st, mode, want, |e, out| self.scatter_residual(e, out, &mut r));
        Ok(r)
    }

    /// Symmetric Jacobian of the full residual (lower triangle stored).
    pub fn assemble_jacobian(&self, st: &State) -> Result<SparseSymmetric, AssemblyError> {
        Ok(self.residual_and_jacobian(st)?.1)
    }

    pub fn residual_and_jacobian(&self, st: &State) -> Result<(Vec<f64>, SparseSymmetric), AssemblyError> {
        self.check(st, Mode::Full)?;
        let mut r = vec![0.0; self.n_dofs()];
        let mut vals = vec![0.0; self.lower.row_idx.len()];
        let want = Want { residual: true, jacobian: true, energy: false };
        self.for_each_element(st, Mode::Full, want, |e, out| {
            self.scatter_residual(e, out, &mut r);
            self.scatter_lower(e, out, &mut vals);
        });
        Ok((r, self.lower_matrix(vals)))
    }

    /// Residual and Jacobian in unsymmetric storage. In quasi-monolithic mode
    /// the displacement/damage coupling block `dR_u/dD` is zero.
    pub fn residual_and_general_jacobian(
        &self,
        st: &State,
        mode: Mode,
    ) -> Result<(Vec<f64>, CscMatrix), AssemblyError> {
        self.check(st, mode)?;
        let (pat, table) = self.general();
        let mut r = vec![0.0; self.n_dofs()];
        let mut vals = vec![0.0; pat.row_idx.len()];
        let want = Want { residual: true, jacobian: true, energy: false };
        self.for_each_element(st, mode, want, |e, out| {
            self.scatter_residual(e, out, &mut r);
            let t = &table[e];
            for p in 0..NLOC {
                for q in 0..NLOC {
                    vals[t[p * NLOC + q] as usize] += out.k[p][q];
                }
            }
        });
        let n = self.n_dofs();
        let m = CscMatrix::new(n, n, pat.col_ptr.clone(), pat.row_idx.clone(), vals)
            .expect("assembled pattern is valid");
        Ok((r, m))
    }

    /// Per-element contributions to the total energy.
    pub fn element_energies(&self, st: &State) -> Result<Vec<f64>, AssemblyError> {
        self.check(st, Mode::Full)?;
        let mut en = vec![0.0; self.elements.len()];
        let want = Want { residual: false, jacobian: false, energy: true };
        self.for_each_element(st, Mode::Full, want, |e, out| en[e] = out.energy);
        Ok(en)
    }

    /// Regularized energy including the gradient and penalty terms.
    pub fn total_energy(&self, st: &State) -> Result<f64, AssemblyError> {
        Ok(self.element_energies(st)?.iter().sum())
    }

    /// `E(b) - E(a)` summed element by element, which keeps small differences
    /// of large energies accurate.
    pub fn energy_difference(&self, a: &State, b: &State) -> Result<f64, AssemblyError> {
        let ea = self.element_energies(a)?;
        let eb = self.element_energies(b)?;
        Ok(ea.iter().zip(&eb).map(|(x, y)| y - x).sum())
    }

    /// Force exerted by the constraint on the body over the node set, along
    /// `component`: the sum of the unreduced displacement residual entries.
    pub fn reaction_force(&self, st: &State, nodes: &[usize], component: Component) -> Result<f64, AssemblyError> {
        let r = self.assemble_residual(st, Mode::Full)?;
        Ok(reaction_from_residual(&r, nodes, component))
    }

    /// [`Assembler::reaction_force`] over a named boundary set of the mesh.
    pub fn reaction_on_set(&self, st: &State, set: &str, component: Component) -> Result<f64, AssemblyError> {
        let nodes = self.sets.get(set).ok_or_else(|| MeshError::UnknownSet(set.to_string()))?;
        self.reaction_force(st, nodes, component)
    }
}

/// Reaction along `component` summed over `nodes` of an assembled residual.
pub fn reaction_from_residual(r: &[f64], nodes: &[usize], component: Component) -> f64 {
    nodes.iter().map(|&a| r[2 * a + component.offset()]).sum()
}
