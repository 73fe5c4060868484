//! Element-level residual, tangent and energy of the coupled problem.
//!
//! Local DOF order: `[u0x, u0y, u1x, u1y, u2x, u2y, u3x, u3y, d0, d1, d2, d3]`.

use crate::constitutive::{spectral_split, MaterialParams, SymTensor2, SQRT_2};
use crate::mesh::quad4::PointData;

pub(crate) const NLOC: usize = 12;

#[derive(Clone, Copy)]
pub(crate) struct Want {
    pub residual: bool,
    pub jacobian: bool,
    pub energy: bool,
}

#[derive(Clone)]
pub(crate) struct ElementOut {
    pub r: [f64; NLOC],
    pub k: [[f64; NLOC]; NLOC],
    pub energy: f64,
}

impl Default for ElementOut {
    fn default() -> Self {
        ElementOut { r: [0.0; NLOC], k: [[0.0; NLOC]; NLOC], energy: 0.0 }
    }
}

pub(crate) struct ElementFields {
    pub u: [f64; 8],
    pub d: [f64; 4],
    pub d_prev: [f64; 4],
    /// Extrapolated damage driving the displacement degradation, if any.
    pub d_tilde: Option<[f64; 4]>,
}

#[inline]
fn mandel_dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Strain-displacement rows of the Mandel strain for node `a`:
/// `bmat[a][c]` is the 3-vector multiplying displacement component `c`.
#[inline]
fn b_matrix(p: &PointData) -> [[[f64; 3]; 2]; 4] {
    let mut b = [[[0.0; 3]; 2]; 4];
    for a in 0..4 {
        let [gx, gy] = p.grad[a];
        b[a][0] = [gx, 0.0, gy / SQRT_2];
        b[a][1] = [0.0, gy, gx / SQRT_2];
    }
    b
}

pub(crate) fn element(
    points: &[PointData; 4],
    fields: &ElementFields,
    mat: &MaterialParams,
    thickness: f64,
    want: Want,
    out: &mut ElementOut,
) {
    *out = ElementOut::default();
    let pref = mat.surface_prefactor();
    let (l, gamma) = (mat.length, mat.gamma);
    for p in points {
        let w = p.jxw * thickness;
        let b = b_matrix(p);
        let mut eps = [0.0; 3];
        let mut d = 0.0;
        let mut dp = 0.0;
        let mut gd = [0.0; 2];
        let mut dt = 0.0;
        for a in 0..4 {
            for c in 0..2 {
                let ua = fields.u[2 * a + c];
                for r in 0..3 {
                    eps[r] += b[a][c][r] * ua;
                }
            }
            d += p.n[a] * fields.d[a];
            dp += p.n[a] * fields.d_prev[a];
            gd[0] += p.grad[a][0] * fields.d[a];
            gd[1] += p.grad[a][1] * fields.d[a];
            if let Some(t) = &fields.d_tilde {
                dt += p.n[a] * t[a];
            }
        }
        let split = spectral_split(SymTensor2::from_mandel(eps), mat);
        let sp = split.stress_plus.mandel();
        let sm = split.stress_minus.mandel();
        let sp_e = mandel_dot(&sp, &eps);
        let one_d = 1.0 - d;
        let g_u = match fields.d_tilde {
            Some(_) => (1.0 - dt) * (1.0 - dt),
            None => one_d * one_d,
        };
        let z = (d - dp).min(0.0);

        if want.energy {
            let grad2 = gd[0] * gd[0] + gd[1] * gd[1];
            out.energy += w
                * (one_d * one_d * 0.5 * sp_e
                    + 0.5 * mandel_dot(&sm, &eps)
                    + pref * (d / l + l * grad2)
                    + 0.5 * gamma * z * z);
        }

        // B^T sigma+ per displacement DOF
        let mut bsp = [0.0; 8];
        for a in 0..4 {
            for c in 0..2 {
                bsp[2 * a + c] = mandel_dot(&b[a][c], &sp);
            }
        }

        if want.residual {
            let sig = [g_u * sp[0] + sm[0], g_u * sp[1] + sm[1], g_u * sp[2] + sm[2]];
            for a in 0..4 {
                for c in 0..2 {
                    out.r[2 * a + c] += w * mandel_dot(&b[a][c], &sig);
                }
                let gdn = gd[0] * p.grad[a][0] + gd[1] * p.grad[a][1];
                out.r[8 + a] += w
                    * (-one_d * p.n[a] * sp_e
                        + pref * (p.n[a] / l + 2.0 * l * gdn)
                        + gamma * p.n[a] * z);
            }
        }

        if want.jacobian {
            let cp = split.tangent_plus;
            let cm = split.tangent_minus;
            let mut ct = [[0.0; 3]; 3];
            for r in 0..3 {
                for s in 0..3 {
                    ct[r][s] = g_u * cp[r][s] + cm[r][s];
                }
            }
            // C_t B for each displacement DOF
            let mut cb = [[0.0; 3]; 8];
            for a in 0..4 {
                for c in 0..2 {
                    let col = &b[a][c];
                    for r in 0..3 {
                        cb[2 * a + c][r] = ct[r][0] * col[0] + ct[r][1] * col[1] + ct[r][2] * col[2];
                    }
                }
            }
            for i in 0..8 {
                let bi = &b[i / 2][i % 2];
                for j in 0..8 {
                    out.k[i][j] += w * mandel_dot(bi, &cb[j]);
                }
            }
            let coupling = -2.0 * one_d * w;
            let h_minus = if d - dp <= 0.0 { 1.0 } else { 0.0 };
            for a in 0..4 {
                for i in 0..8 {
                    let v = coupling * p.n[a] * bsp[i];
                    // d R_d[a] / d U_i
                    out.k[8 + a][i] += v;
                    if fields.d_tilde.is_none() {
                        out.k[i][8 + a] += v;
                    }
                }
                for bb in 0..4 {
                    let gg = p.grad[a][0] * p.grad[bb][0] + p.grad[a][1] * p.grad[bb][1];
                    let nn = p.n[a] * p.n[bb];
                    out.k[8 + a][8 + bb] +=
                        w * (nn * sp_e + pref * 2.0 * l * gg + gamma * nn * h_minus);
                }
            }
        }
    }
}
