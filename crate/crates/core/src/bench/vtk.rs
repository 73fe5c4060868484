//! Legacy ASCII VTK output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::assembly::State;
use crate::mesh::Mesh;

use super::BenchError;

const VTK_QUAD: u8 = 9;

fn render(mesh: &Mesh, state: &State) -> String {
    let n = mesh.n_nodes();
    let ne = mesh.n_elements();
    let mut s = String::with_capacity(64 * n + 32 * ne);
    s.push_str("# vtk DataFile Version 3.0\nphasefrac\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {n} double");
    for p in &mesh.nodes {
        let _ = writeln!(s, "{} {} 0", p[0], p[1]);
    }
    let _ = writeln!(s, "CELLS {ne} {}", 5 * ne);
    for e in &mesh.elements {
        let _ = writeln!(s, "4 {} {} {} {}", e[0], e[1], e[2], e[3]);
    }
    let _ = writeln!(s, "CELL_TYPES {ne}");
    for _ in 0..ne {
        let _ = writeln!(s, "{VTK_QUAD}");
    }
    let _ = writeln!(s, "POINT_DATA {n}");
    s.push_str("SCALARS damage double 1\nLOOKUP_TABLE default\n");
    for d in &state.d {
        let _ = writeln!(s, "{d}");
    }
    s.push_str("VECTORS displacement double\n");
    for a in 0..n {
        let _ = writeln!(s, "{} {} 0", state.u[2 * a], state.u[2 * a + 1]);
    }
    s
}

/// Writes the mesh with nodal damage and displacement as a legacy ASCII
/// unstructured grid of quads.
pub fn write_vtk(mesh: &Mesh, state: &State, path: impl AsRef<Path>) -> Result<(), BenchError> {
    let path = path.as_ref();
    if state.n_nodes() != mesh.n_nodes() || state.u.len() != 2 * mesh.n_nodes() {
        return Err(BenchError::Invalid(format!(
            "state has {} nodes but the mesh has {}",
            state.n_nodes(),
            mesh.n_nodes()
        )));
    }
    fs::write(path, render(mesh, state)).map_err(|e| BenchError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn single_quad() {
        let mesh = Mesh {
            nodes: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            elements: vec![[0, 1, 2, 3]],
            boundary_sets: BTreeMap::new(),
            thickness: 1.0,
        };
        let text = render(&mesh, &State::zeros(4));
        assert!(text.contains("POINTS 4 double\n"));
        assert!(text.contains("CELLS 1 5\n4 0 1 2 3\n"));
        assert!(text.contains("CELL_TYPES 1\n9\n"));
        assert!(text.contains("LOOKUP_TABLE default\n0\n0\n0\n0\nVECTORS"));
    }
}
