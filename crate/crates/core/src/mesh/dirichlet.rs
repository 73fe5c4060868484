use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Mesh, MeshError};

/// Displacement component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    X,
    Y,
}

impl Component {
    pub fn offset(self) -> usize {
        match self {
            Component::X => 0,
            Component::Y => 1,
        }
    }
}

/// Prescribed value as a function of pseudo-time `t` in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryValue {
    Fixed { value: f64 },
    /// Linear ramp from zero to `total` at `t = 1`.
    Ramp { total: f64 },
}

impl BoundaryValue {
    pub fn zero() -> Self {
        BoundaryValue::Fixed { value: 0.0 }
    }

    pub fn at(&self, t: f64) -> f64 {
        match *self {
            BoundaryValue::Fixed { value } => value,
            BoundaryValue::Ramp { total } => total * t,
        }
    }
}

/// One boundary condition: a node set, a component and a value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcSpec {
    pub set: String,
    pub component: Component,
    pub value: BoundaryValue,
}

impl BcSpec {
    pub fn new(set: impl Into<String>, component: Component, value: BoundaryValue) -> Self {
        BcSpec { set: set.into(), component, value }
    }
}

/// Prescribed displacement DOFs ordered by global index (`2 * node + c`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DirichletMap {
    pub dofs: BTreeMap<usize, BoundaryValue>,
}

impl DirichletMap {
    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    pub fn contains(&self, dof: usize) -> bool {
        self.dofs.contains_key(&dof)
    }

    pub fn indices(&self) -> Vec<usize> {
        self.dofs.keys().copied().collect()
    }

    /// `(dof, value)` pairs evaluated at pseudo-time `t`.
    pub fn values_at(&self, t: f64) -> Vec<(usize, f64)> {
        self.dofs.iter().map(|(&i, v)| (i, v.at(t))).collect()
    }

    /// Writes the prescribed values at `t` into a displacement vector.
    pub fn impose(&self, u: &mut [f64], t: f64) {
        for (&i, v) in &self.dofs {
            u[i] = v.at(t);
        }
    }
}

/// Collects the constrained displacement DOFs of all conditions. A DOF named
/// by several conditions must receive the same value function.
pub fn extract_dirichlet_dofs(mesh: &Mesh, bcs: &[BcSpec]) -> Result<DirichletMap, MeshError> {
    let mut dofs = BTreeMap::new();
    for bc in bcs {
        for &node in mesh.set(&bc.set)? {
            let dof = 2 * node + bc.component.offset();
            match dofs.insert(dof, bc.value) {
                Some(prev) if prev != bc.value => return Err(MeshError::ConflictingDof { dof }),
                _ => {}
            }
        }
    }
    Ok(DirichletMap { dofs })
}
