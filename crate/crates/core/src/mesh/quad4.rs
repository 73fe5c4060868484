//! Bilinear quadrilateral shape functions and the 2x2 Gauss rule.

/// Reference-element corner coordinates, counter-clockwise.
pub const CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

const G: f64 = 0.577_350_269_189_625_8; // 1 / sqrt(3)

/// Gauss points of the 2x2 rule; all weights equal one.
pub const GAUSS_POINTS: [[f64; 2]; 4] = [[-G, -G], [G, -G], [G, G], [-G, G]];

#[inline]
pub fn shape(xi: f64, eta: f64) -> [f64; 4] {
    let mut n = [0.0; 4];
    for (a, c) in CORNERS.iter().enumerate() {
        n[a] = 0.25 * (1.0 + c[0] * xi) * (1.0 + c[1] * eta);
    }
    n
}

/// Derivatives with respect to the reference coordinates, `[dN/dxi, dN/deta]`.
#[inline]
pub fn shape_derivatives(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    let mut dn = [[0.0; 2]; 4];
    for (a, c) in CORNERS.iter().enumerate() {
        dn[a][0] = 0.25 * c[0] * (1.0 + c[1] * eta);
        dn[a][1] = 0.25 * c[1] * (1.0 + c[0] * xi);
    }
    dn
}

/// Shape data of one element at one quadrature point.
#[derive(Debug, Clone, Copy, Default)]
pub struct PointData {
    pub n: [f64; 4],
    /// Physical gradients `[dN/dx, dN/dy]`.
    pub grad: [[f64; 2]; 4],
    /// Jacobian determinant times the quadrature weight.
    pub jxw: f64,
}

/// Jacobian determinant of the isoparametric map at a reference point.
pub fn jacobian_det(coords: &[[f64; 2]; 4], xi: f64, eta: f64) -> f64 {
    let dn = shape_derivatives(xi, eta);
    let mut j = [[0.0; 2]; 2];
    for a in 0..4 {
        for r in 0..2 {
            for c in 0..2 {
                j[r][c] += coords[a][r] * dn[a][c];
            }
        }
    }
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

/// Evaluates shape values and physical gradients at the four Gauss points.
/// Returns `None` when a Jacobian determinant is not strictly positive.
pub fn point_data(coords: &[[f64; 2]; 4]) -> Option<[PointData; 4]> {
    let mut out = [PointData::default(); 4];
    for (q, gp) in GAUSS_POINTS.iter().enumerate() {
        let dn = shape_derivatives(gp[0], gp[1]);
        // J[r][c] = d x_r / d xi_c
        let mut j = [[0.0; 2]; 2];
        for a in 0..4 {
            for r in 0..2 {
                for c in 0..2 {
                    j[r][c] += coords[a][r] * dn[a][c];
                }
            }
        }
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if !(det > 0.0) {
            return None;
        }
        let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
        let mut grad = [[0.0; 2]; 4];
        for a in 0..4 {
            // dN/dx_k = dN/dxi_c * dxi_c/dx_k
            for k in 0..2 {
                grad[a][k] = dn[a][0] * inv[0][k] + dn[a][1] * inv[1][k];
            }
        }
        out[q] = PointData { n: shape(gp[0], gp[1]), grad, jxw: det };
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn partition_of_unity_and_area() {
        let coords = [[0.0, 0.0], [2.0, 0.2], [2.1, 1.5], [-0.1, 1.0]];
        let pd = point_data(&coords).unwrap();
        let mut area = 0.0;
        for p in &pd {
            assert_relative_eq!(p.n.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
            let gx: f64 = p.grad.iter().map(|g| g[0]).sum();
            assert!(gx.abs() < 1e-13);
            // grad of x is (1, 0)
            let dxdx: f64 = (0..4).map(|a| coords[a][0] * p.grad[a][0]).sum();
            assert_relative_eq!(dxdx, 1.0, epsilon = 1e-13);
            area += p.jxw;
        }
        // shoelace
        let mut shoelace = 0.0;
        for a in 0..4 {
            let b = (a + 1) % 4;
            shoelace += coords[a][0] * coords[b][1] - coords[b][0] * coords[a][1];
        }
        assert_relative_eq!(area, 0.5 * shoelace, epsilon = 1e-13);
    }

    #[test]
    fn clockwise_element_rejected() {
        let coords = [[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]];
        assert!(point_data(&coords).is_none());
    }
}
