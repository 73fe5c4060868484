//! Elimination of prescribed DOFs from assembled systems.

use crate::linsolve::{CscMatrix, SparseSymmetric};

use super::AssemblyError;

const NONE: usize = usize::MAX;

/// Partition of a DOF range into kept (free) and eliminated entries.
#[derive(Debug, Clone)]
pub struct Reduction {
    n_full: usize,
    free: Vec<usize>,
    eliminated: Vec<usize>,
    full_to_free: Vec<usize>,
}

impl Reduction {
    pub fn new(n_full: usize, eliminated: &[usize]) -> Result<Self, AssemblyError> {
        let mut full_to_free = vec![0usize; n_full];
        let mut elim = Vec::with_capacity(eliminated.len());
        for &i in eliminated {
            if i >= n_full {
                return Err(AssemblyError::DofOutOfRange { dof: i, n: n_full });
            }
            if full_to_free[i] != NONE {
                full_to_free[i] = NONE;
                elim.push(i);
            }
        }
        elim.sort_unstable();
        let mut free = Vec::with_capacity(n_full - elim.len());
        for i in 0..n_full {
            if full_to_free[i] != NONE {
                full_to_free[i] = free.len();
                free.push(i);
            }
        }
        Ok(Reduction { n_full, free, eliminated: elim, full_to_free })
    }

    /// Keeps only the DOFs in `kept` (all others eliminated).
    pub fn keeping(n_full: usize, kept: &[usize]) -> Result<Self, AssemblyError> {
        let mut mask = vec![true; n_full];
        for &k in kept {
            if k >= n_full {
                return Err(AssemblyError::DofOutOfRange { dof: k, n: n_full });
            }
            mask[k] = false;
        }
        let elim: Vec<usize> = (0..n_full).filter(|&i| mask[i]).collect();
        Self::new(n_full, &elim)
    }

    pub fn n_full(&self) -> usize {
        self.n_full
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn eliminated(&self) -> &[usize] {
        &self.eliminated
    }

    pub fn restrict(&self, v: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| v[i]).collect()
    }

    /// `target[free[k]] += alpha * x[k]`.
    pub fn add_scaled(&self, target: &mut [f64], alpha: f64, x: &[f64]) {
        for (k, &i) in self.free.iter().enumerate() {
            target[i] += alpha * x[k];
        }
    }

    /// Reinserts eliminated values: the result holds `x_free` at free DOFs
    /// and `values` (given as `(dof, value)`) elsewhere; unspecified
    /// eliminated DOFs are zero.
    pub fn recover(&self, x_free: &[f64], values: &[(usize, f64)]) -> Vec<f64> {
        let mut x = vec![0.0; self.n_full];
        for (k, &i) in self.free.iter().enumerate() {
            x[i] = x_free[k];
        }
        for &(i, v) in values {
            if self.full_to_free[i] == NONE {
                x[i] = v;
            }
        }
        x
    }

    pub fn symmetric_gather(&self, a: &SparseSymmetric) -> SymmetricGather {
        let (cp, ri) = (a.col_ptr(), a.row_idx());
        let mut col_ptr = Vec::with_capacity(self.free.len() + 1);
        let mut row_idx = Vec::new();
        let mut src = Vec::new();
        col_ptr.push(0);
        for &j in &self.free {
            for p in cp[j]..cp[j + 1] {
                let r = self.full_to_free[ri[p]];
                if r != NONE {
                    row_idx.push(r);
                    src.push(p);
                }
            }
            col_ptr.push(row_idx.len());
        }
        let values = vec![0.0; src.len()];
        SymmetricGather {
            template: SparseSymmetric::new(self.free.len(), col_ptr, row_idx, values)
                .expect("restriction of a valid pattern"),
            src,
        }
    }

    pub fn general_gather(&self, a: &CscMatrix) -> GeneralGather {
        let (cp, ri) = (a.col_ptr(), a.row_idx());
        let mut col_ptr = Vec::with_capacity(self.free.len() + 1);
        let mut row_idx = Vec::new();
        let mut src = Vec::new();
        col_ptr.push(0);
        for &j in &self.free {
            for p in cp[j]..cp[j + 1] {
                let r = self.full_to_free[ri[p]];
                if r != NONE {
                    row_idx.push(r);
                    src.push(p);
                }
            }
            col_ptr.push(row_idx.len());
        }
        let n = self.free.len();
        let values = vec![0.0; src.len()];
        GeneralGather {
            template: CscMatrix::new(n, n, col_ptr, row_idx, values).expect("restriction of a valid pattern"),
            src,
        }
    }
}

/// Precomputed extraction of the free-free block of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricGather {
    template: SparseSymmetric,
    src: Vec<usize>,
}

impl SymmetricGather {
    pub fn apply(&self, full: &SparseSymmetric) -> SparseSymmetric {
        let mut out = self.template.clone();
        let v = full.values();
        for (o, &s) in out.values_mut().iter_mut().zip(&self.src) {
            *o = v[s];
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct GeneralGather {
    template: CscMatrix,
    src: Vec<usize>,
}

impl GeneralGather {
    pub fn apply(&self, full: &CscMatrix) -> CscMatrix {
        let mut out = self.template.clone();
        let v = full.values();
        for (o, &s) in out.values_mut().iter_mut().zip(&self.src) {
            *o = v[s];
        }
        out
    }
}

/// Reduced linear system `K_ff x_f = b_f - K_fc x_c` for prescribed
/// `(dof, value)` pairs, with the map to recover the full solution.
pub fn apply_dirichlet_reduction(
    k: &SparseSymmetric,
    rhs: &[f64],
    prescribed: &[(usize, f64)],
) -> Result<(SparseSymmetric, Vec<f64>, Reduction), AssemblyError> {
    let n = k.dim();
    if rhs.len() != n {
        return Err(AssemblyError::DimensionMismatch { what: "right-hand side", expected: n, found: rhs.len() });
    }
    let dofs: Vec<usize> = prescribed.iter().map(|p| p.0).collect();
    let red = Reduction::new(n, &dofs)?;
    let mut xc = vec![0.0; n];
    for &(i, v) in prescribed {
        xc[i] = v;
    }
    let kx = k.mul_vec(&xc);
    let adjusted: Vec<f64> = rhs.iter().zip(&kx).map(|(b, q)| b - q).collect();
    let reduced = red.symmetric_gather(k).apply(k);
    Ok((reduced, red.restrict(&adjusted), red))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_constraints_is_identity() {
        let k = SparseSymmetric::from_triplets(2, &[(0, 0, 2.0), (1, 0, -1.0), (1, 1, 2.0)]).unwrap();
        let (r, b, red) = apply_dirichlet_reduction(&k, &[1.0, 2.0], &[]).unwrap();
        assert_eq!(r, k);
        assert_eq!(b, vec![1.0, 2.0]);
        assert_eq!(red.recover(&[5.0, 6.0], &[]), vec![5.0, 6.0]);
    }

    #[test]
    fn everything_constrained() {
        let k = SparseSymmetric::identity(2);
        let (r, b, red) = apply_dirichlet_reduction(&k, &[1.0, 2.0], &[(0, 3.0), (1, 4.0)]).unwrap();
        assert_eq!(r.dim(), 0);
        assert!(b.is_empty());
        assert_eq!(red.recover(&[], &[(0, 3.0), (1, 4.0)]), vec![3.0, 4.0]);
    }

    #[test]
    fn out_of_range() {
        let k = SparseSymmetric::identity(2);
        assert!(matches!(
            apply_dirichlet_reduction(&k, &[0.0, 0.0], &[(2, 1.0)]),
            Err(AssemblyError::DofOutOfRange { dof: 2, n: 2 })
        ));
    }
}
