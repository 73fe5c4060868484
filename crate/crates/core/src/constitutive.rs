//! Pointwise material law for the AT1 phase-field model with a spectral
//! tension/compression split of the small-strain tensor (plane strain).
//!
//! Second-order symmetric tensors are handled in Mandel notation,
//! `[xx, yy, sqrt(2) xy]`, so that double contractions become dot products
//! and fourth-order tangents are symmetric 3x3 matrices.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub(crate) const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Relative gap below which the two principal strains are treated as equal.
const EIGEN_COINCIDENCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum MaterialError {
    #[error("Young's modulus must be positive, got {0}")]
    YoungsModulus(f64),
    #[error("Poisson ratio must lie in (0, 0.5) or be zero, got {0}")]
    PoissonRatio(f64),
    #[error("critical energy release rate must be positive, got {0}")]
    Toughness(f64),
    #[error("characteristic length must be positive, got {0}")]
    Length(f64),
    #[error("irreversibility tolerance must be positive, got {0}")]
    IrreversibilityTolerance(f64),
}

/// Elastic and fracture constants in the mm / N / MPa unit system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub lambda: f64,
    pub mu: f64,
    /// Critical energy release rate (N/mm).
    pub gc: f64,
    /// Regularization length (mm).
    pub length: f64,
    /// Penalty coefficient of the irreversibility term (N/mm^3).
    pub gamma: f64,
    pub tol_ir: f64,
}

impl MaterialParams {
    pub fn new(
        youngs_modulus: f64,
        poisson_ratio: f64,
        gc: f64,
        length: f64,
        tol_ir: f64,
    ) -> Result<Self, MaterialError> {
        if !(youngs_modulus > 0.0 && youngs_modulus.is_finite()) {
            return Err(MaterialError::YoungsModulus(youngs_modulus));
        }
        if !(0.0..0.5).contains(&poisson_ratio) {
            return Err(MaterialError::PoissonRatio(poisson_ratio));
        }
        if !(gc > 0.0 && gc.is_finite()) {
            return Err(MaterialError::Toughness(gc));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(MaterialError::Length(length));
        }
        if !(tol_ir > 0.0 && tol_ir.is_finite()) {
            return Err(MaterialError::IrreversibilityTolerance(tol_ir));
        }
        let (lambda, mu) = lame_from_engineering(youngs_modulus, poisson_ratio);
        Ok(Self {
            youngs_modulus,
            poisson_ratio,
            lambda,
            mu,
            gc,
            length,
            gamma: penalty_gamma(gc, length, tol_ir),
            tol_ir,
        })
    }

    /// Prefactor `3 Gc / 8` of the AT1 surface energy.
    #[inline]
    pub fn surface_prefactor(&self) -> f64 {
        3.0 * self.gc / 8.0
    }

    /// Plane-strain isotropic stiffness in Mandel notation.
    pub fn elasticity(&self) -> [[f64; 3]; 3] {
        let (l, m) = (self.lambda, self.mu);
        [
            [l + 2.0 * m, l, 0.0],
            [l, l + 2.0 * m, 0.0],
            [0.0, 0.0, 2.0 * m],
        ]
    }
}

/// Plane-strain Lamé constants `(lambda, mu)` from Young's modulus and
/// Poisson ratio.
pub fn lame_from_engineering(youngs_modulus: f64, poisson_ratio: f64) -> (f64, f64) {
    let e = youngs_modulus;
    let nu = poisson_ratio;
    let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = e / (2.0 * (1.0 + nu));
    (lambda, mu)
}

/// Fixed penalty coefficient `(Gc / l) * 27 / (64 tol_ir^2)`.
pub fn penalty_gamma(gc: f64, length: f64, tol_ir: f64) -> f64 {
    gc / length * 27.0 / (64.0 * tol_ir * tol_ir)
}

/// Symmetric 2x2 tensor with tensorial (not engineering) shear component.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SymTensor2 {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl SymTensor2 {
    pub const ZERO: Self = Self { xx: 0.0, yy: 0.0, xy: 0.0 };

    pub fn new(xx: f64, yy: f64, xy: f64) -> Self {
        Self { xx, yy, xy }
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Self { xx: a, yy: b, xy: 0.0 }
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// Double contraction `a : b`.
    #[inline]
    pub fn ddot(&self, other: &Self) -> f64 {
        self.xx * other.xx + self.yy * other.yy + 2.0 * self.xy * other.xy
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    #[inline]
    pub fn mandel(&self) -> [f64; 3] {
        [self.xx, self.yy, SQRT_2 * self.xy]
    }

    #[inline]
    pub fn from_mandel(v: [f64; 3]) -> Self {
        Self { xx: v[0], yy: v[1], xy: v[2] / SQRT_2 }
    }

    #[inline]
    fn scaled_add(&self, s: f64, other: &Self) -> Self {
        Self {
            xx: self.xx + s * other.xx,
            yy: self.yy + s * other.yy,
            xy: self.xy + s * other.xy,
        }
    }

    #[inline]
    fn scale(&self, s: f64) -> Self {
        Self { xx: s * self.xx, yy: s * self.yy, xy: s * self.xy }
    }

    /// Eigenvalues (larger first) and unit eigenvectors in closed form.
    /// Each eigenvector has its first nonzero component positive.
    pub fn eigen(&self) -> ([f64; 2], [[f64; 2]; 2]) {
        let mean = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        let radius = half_diff.hypot(self.xy);
        let values = [mean + radius, mean - radius];
        let theta = 0.5 * self.xy.atan2(half_diff);
        let (s, c) = theta.sin_cos();
        let n1 = canonical_sign([c, s]);
        let n2 = canonical_sign([-s, c]);
        (values, [n1, n2])
    }
}

fn canonical_sign(v: [f64; 2]) -> [f64; 2] {
    let lead = if v[0] != 0.0 { v[0] } else { v[1] };
    if lead < 0.0 {
        [-v[0], -v[1]]
    } else {
        v
    }
}

#[inline]
fn ramp_plus(z: f64) -> f64 {
    z.max(0.0)
}

/// Derivative of the positive ramp, taken as zero at the kink.
#[inline]
fn heaviside_plus(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Result of splitting a strain into tensile and compressive parts.
#[derive(Debug, Clone, Copy)]
pub struct SplitState {
    pub strain: SymTensor2,
    pub eigenvalues: [f64; 2],
    pub eigenvectors: [[f64; 2]; 2],
    pub strain_plus: SymTensor2,
    pub strain_minus: SymTensor2,
    pub stress_plus: SymTensor2,
    pub stress_minus: SymTensor2,
    /// `d sigma+ / d e` in Mandel notation.
    pub tangent_plus: [[f64; 3]; 3],
    /// `d sigma- / d e` in Mandel notation.
    pub tangent_minus: [[f64; 3]; 3],
}

impl SplitState {
    /// Tensile energy density `psi+ = sigma+ : e / 2`.
    #[inline]
    pub fn psi_plus(&self) -> f64 {
        0.5 * self.stress_plus.ddot(&self.strain)
    }

    #[inline]
    pub fn psi_minus(&self) -> f64 {
        0.5 * self.stress_minus.ddot(&self.strain)
    }
}

/// Spectral split of the strain, the split stresses, and their tangents.
pub fn spectral_split(strain: SymTensor2, mat: &MaterialParams) -> SplitState {
    let (values, vectors) = strain.eigen();
    let [n1, n2] = vectors;
    let m1 = [n1[0] * n1[0], n1[1] * n1[1], SQRT_2 * n1[0] * n1[1]];
    let m2 = [n2[0] * n2[0], n2[1] * n2[1], SQRT_2 * n2[0] * n2[1]];
    let g = [
        n1[0] * n2[0],
        n1[1] * n2[1],
        (n1[0] * n2[1] + n1[1] * n2[0]) / SQRT_2,
    ];

    let lp = [ramp_plus(values[0]), ramp_plus(values[1])];
    let hp = [heaviside_plus(values[0]), heaviside_plus(values[1])];

    // Both principal strains share a sign: the positive part is all or nothing.
    let strain_plus = if hp[0] == hp[1] {
        strain.scale(hp[0])
    } else {
        SymTensor2::from_mandel([
            lp[0] * m1[0] + lp[1] * m2[0],
            lp[0] * m1[1] + lp[1] * m2[1],
            lp[0] * m1[2] + lp[1] * m2[2],
        ])
    };
    let strain_minus = strain.scaled_add(-1.0, &strain_plus);

    let tr = strain.trace();
    let (lambda, mu) = (mat.lambda, mat.mu);
    let tr_plus = ramp_plus(tr);
    let tr_minus = tr - tr_plus;
    let identity = SymTensor2::diag(1.0, 1.0);
    let stress_plus = identity.scale(lambda * tr_plus).scaled_add(2.0 * mu, &strain_plus);
    let stress_minus = identity.scale(lambda * tr_minus).scaled_add(2.0 * mu, &strain_minus);

    // Divided difference of the ramp between the two principal strains.
    let gap = values[0] - values[1];
    let coincident =
        gap.abs() <= EIGEN_COINCIDENCE * (values[0].abs() + values[1].abs()).max(1.0);
    let q = if coincident {
        heaviside_plus(0.5 * (values[0] + values[1]))
    } else {
        (lp[0] - lp[1]) / gap
    };

    let h_tr = heaviside_plus(tr);
    let mut tangent_plus = [[0.0; 3]; 3];
    let mut tangent_minus = [[0.0; 3]; 3];
    let ivec = [1.0, 1.0, 0.0];
    for a in 0..3 {
        for b in 0..3 {
            let proj = hp[0] * m1[a] * m1[b] + hp[1] * m2[a] * m2[b] + 2.0 * q * g[a] * g[b];
            let delta = if a == b { 1.0 } else { 0.0 };
            let vol = lambda * ivec[a] * ivec[b];
            tangent_plus[a][b] = h_tr * vol + 2.0 * mu * proj;
            tangent_minus[a][b] = (1.0 - h_tr) * vol + 2.0 * mu * (delta - proj);
        }
    }

    SplitState {
        strain,
        eigenvalues: values,
        eigenvectors: vectors,
        strain_plus,
        strain_minus,
        stress_plus,
        stress_minus,
        tangent_plus,
        tangent_minus,
    }
}

/// Pointwise, gradient-free part of the regularized energy density:
/// degraded elastic energy, the `d / l` crack term and the penalty term.
/// The `l |grad d|^2` contribution is integrated by the assembler.
pub fn energy_density(strain: SymTensor2, d: f64, d_prev: f64, mat: &MaterialParams) -> f64 {
    let split = spectral_split(strain, mat);
    let g = (1.0 - d) * (1.0 - d);
    let z = (d - d_prev).min(0.0);
    g * split.psi_plus()
        + split.psi_minus()
        + mat.surface_prefactor() * d / mat.length
        + 0.5 * mat.gamma * z * z
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_lame() -> MaterialParams {
        MaterialParams {
            youngs_modulus: 2.5,
            poisson_ratio: 0.25,
            lambda: 1.0,
            mu: 1.0,
            gc: 1.0,
            length: 1.0,
            gamma: 1.0,
            tol_ir: 1.0,
        }
    }

    #[test]
    fn lame_constants() {
        let (l, m) = lame_from_engineering(210000.0, 0.3);
        assert_relative_eq!(m, 80769.230769, epsilon = 1e-5);
        assert_relative_eq!(l, 121153.846154, epsilon = 1e-5);
        let (l, m) = lame_from_engineering(21850.0, 0.18);
        assert_relative_eq!(m, 9258.474576, epsilon = 1e-5);
        assert_relative_eq!(l, 5207.891949, epsilon = 1e-5);
        let (l, m) = lame_from_engineering(3.0, 0.0);
        assert_eq!(l, 0.0);
        assert_eq!(m, 1.5);
    }

    #[test]
    fn penalty_values() {
        assert_relative_eq!(penalty_gamma(2.7, 0.024, 0.01), 474609.375, max_relative = 1e-12);
        assert_relative_eq!(penalty_gamma(0.095, 3.125, 0.01), 128.25, max_relative = 1e-12);
        let mut last = f64::INFINITY;
        for tol in [1e-3, 1e-2, 1e-1, 1.0, 1e3, 1e9] {
            let g = penalty_gamma(2.7, 0.024, tol);
            assert!(g < last);
            last = g;
        }
        assert!(last < 1e-12);
    }

    #[test]
    fn material_validation() {
        assert!(MaterialParams::new(210000.0, 0.3, 2.7, 0.024, 0.01).is_ok());
        assert_eq!(
            MaterialParams::new(-1.0, 0.3, 2.7, 0.024, 0.01),
            Err(MaterialError::YoungsModulus(-1.0))
        );
        assert!(MaterialParams::new(1.0, 0.5, 2.7, 0.024, 0.01).is_err());
        assert!(MaterialParams::new(1.0, 0.2, 0.0, 0.024, 0.01).is_err());
        assert!(MaterialParams::new(1.0, 0.2, 1.0, 0.0, 0.01).is_err());
    }

    #[test]
    fn diagonal_split() {
        let mat = unit_lame();
        let s = spectral_split(SymTensor2::diag(2e-3, -1e-3), &mat);
        assert_relative_eq!(s.strain_plus.xx, 2e-3);
        assert_eq!(s.strain_plus.yy, 0.0);
        assert_relative_eq!(s.strain_minus.yy, -1e-3);
        assert_relative_eq!(s.stress_plus.xx, 1e-3 + 4e-3, epsilon = 1e-15);
        assert_relative_eq!(s.stress_plus.yy, 1e-3, epsilon = 1e-15);
        assert_relative_eq!(s.stress_minus.xx, 0.0, epsilon = 1e-15);
        assert_relative_eq!(s.stress_minus.yy, -2e-3, epsilon = 1e-15);
    }

    #[test]
    fn zero_strain_gives_zero() {
        let s = spectral_split(SymTensor2::ZERO, &unit_lame());
        assert_eq!(s.strain_plus, SymTensor2::ZERO);
        assert_eq!(s.stress_plus, SymTensor2::ZERO);
        assert_eq!(s.stress_minus, SymTensor2::ZERO);
        assert_eq!(s.psi_plus(), 0.0);
    }

    #[test]
    fn eigenvector_sign_convention() {
        for e in [
            SymTensor2::new(1.0, 2.0, 0.5),
            SymTensor2::new(-1.0, 2.0, -0.5),
            SymTensor2::new(0.0, 0.0, 1.0),
            SymTensor2::new(3.0, -1.0, 0.0),
            SymTensor2::new(-3.0, 1.0, 0.0),
        ] {
            let (vals, vecs) = e.eigen();
            assert!(vals[0] >= vals[1]);
            for v in vecs {
                let lead = if v[0] != 0.0 { v[0] } else { v[1] };
                assert!(lead > 0.0);
                // e v = lambda v
            }
            for (lam, v) in vals.iter().zip(vecs) {
                let ev = [e.xx * v[0] + e.xy * v[1], e.xy * v[0] + e.yy * v[1]];
                assert_relative_eq!(ev[0], lam * v[0], epsilon = 1e-12);
                assert_relative_eq!(ev[1], lam * v[1], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn undamaged_tangent_is_isotropic() {
        let mat = MaterialParams::new(210000.0, 0.3, 2.7, 0.024, 0.01).unwrap();
        let c = mat.elasticity();
        for e in [
            SymTensor2::new(1e-3, -4e-4, 2e-4),
            SymTensor2::new(-1e-3, -4e-4, 2e-4),
            SymTensor2::new(1e-3, 4e-4, -7e-4),
        ] {
            let s = spectral_split(e, &mat);
            for a in 0..3 {
                for b in 0..3 {
                    let sum = s.tangent_plus[a][b] + s.tangent_minus[a][b];
                    assert_relative_eq!(sum, c[a][b], epsilon = 1e-9 * mat.lambda);
                }
            }
        }
    }

    #[test]
    fn energy_density_examples() {
        let mut mat = MaterialParams::new(210000.0, 0.3, 2.7, 0.024, 0.01).unwrap();
        assert_eq!(energy_density(SymTensor2::ZERO, 0.0, 0.0, &mat), 0.0);
        assert_relative_eq!(
            energy_density(SymTensor2::ZERO, 0.5, 0.0, &mat),
            21.09375,
            max_relative = 1e-12
        );
        mat.gamma = 474609.375;
        assert_relative_eq!(
            energy_density(SymTensor2::ZERO, 0.0, 0.5, &mat),
            59326.171875,
            max_relative = 1e-12
        );
    }
}
