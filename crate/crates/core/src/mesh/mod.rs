//! Quadrilateral meshes: benchmark generation, Abaqus input parsing and
//! Dirichlet degree-of-freedom extraction.

mod dirichlet;
mod generate;
mod inp;
pub mod quad4;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dirichlet::{extract_dirichlet_dofs, BcSpec, BoundaryValue, Component, DirichletMap};
pub use generate::{build_benchmark_mesh, Benchmark, GeometrySpec};
pub use inp::{parse_abaqus_inp, write_abaqus_inp, InpMesh};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid geometry specification: {0}")]
    InvalidSpec(String),
    #[error("refinement yields {count} element(s) along {axis}; at least 2 are required")]
    TooFewElements { axis: &'static str, count: usize },
    #[error("characteristic length {length} exceeds the fracture band width {band}")]
    LengthExceedsBand { length: f64, band: f64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("structural error: {0}")]
    Structural(String),
    #[error("unknown boundary set '{0}'")]
    UnknownSet(String),
    #[error("conflicting prescribed values for displacement dof {dof}")]
    ConflictingDof { dof: usize },
    #[error("failed to serialize mesh: {0}")]
    Json(#[from] serde_json::Error),
}

/// Unstructured mesh of 4-node quadrilaterals (counter-clockwise
/// connectivity) with named node sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 4]>,
    pub boundary_sets: BTreeMap<String, Vec<usize>>,
    pub thickness: f64,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn element_coords(&self, e: usize) -> [[f64; 2]; 4] {
        let conn = &self.elements[e];
        [
            self.nodes[conn[0]],
            self.nodes[conn[1]],
            self.nodes[conn[2]],
            self.nodes[conn[3]],
        ]
    }

    pub fn set(&self, name: &str) -> Result<&[usize], MeshError> {
        self.boundary_sets
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| MeshError::UnknownSet(name.to_string()))
    }

    /// Index of the node closest to `p`.
    pub fn nearest_node(&self, p: [f64; 2]) -> Option<usize> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, x)| (i, (x[0] - p[0]).hypot(x[1] - p[1])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }

    /// Checks connectivity, element orientation at the Gauss points and set
    /// indices.
    pub fn validate(&self) -> Result<(), MeshError> {
        if !(self.thickness > 0.0) {
            return Err(MeshError::Structural(format!(
                "thickness must be positive, got {}",
                self.thickness
            )));
        }
        let n = self.nodes.len();
        for (e, conn) in self.elements.iter().enumerate() {
            for (a, &i) in conn.iter().enumerate() {
                if i >= n {
                    return Err(MeshError::Structural(format!(
                        "element {e} references missing node {i}"
                    )));
                }
                if conn[..a].contains(&i) {
                    return Err(MeshError::Structural(format!(
                        "element {e} repeats node {i}"
                    )));
                }
            }
            let coords = self.element_coords(e);
            for gp in quad4::GAUSS_POINTS {
                if !(quad4::jacobian_det(&coords, gp[0], gp[1]) > 0.0) {
                    return Err(MeshError::Structural(format!(
                        "element {e} has a non-positive Jacobian determinant"
                    )));
                }
            }
        }
        for (name, ids) in &self.boundary_sets {
            if let Some(&bad) = ids.iter().find(|&&i| i >= n) {
                return Err(MeshError::Structural(format!(
                    "set '{name}' references missing node {bad}"
                )));
            }
        }
        Ok(())
    }

    /// Native JSON dump with fields `nodes`, `elements`, `boundary_sets`,
    /// `thickness`.
    pub fn to_json(&self) -> Result<String, MeshError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, MeshError> {
        let mesh: Mesh = serde_json::from_str(text)?;
        mesh.validate()?;
        Ok(mesh)
    }

    /// Total area of the mesh.
    pub fn area(&self) -> f64 {
        (0..self.elements.len())
            .map(|e| {
                quad4::point_data(&self.element_coords(e))
                    .map(|pd| pd.iter().map(|p| p.jxw).sum::<f64>())
                    .unwrap_or(0.0)
            })
            .sum()
    }
}
