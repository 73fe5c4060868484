//! Multifrontal LU on the symmetrised pattern: diagonal threshold pivoting
//! with delays inside the tree, partial pivoting at the roots.

use std::sync::Arc;

use super::sparse::CscMatrix;
use super::symbolic::{analyze, Adjacency, Analysis, NONE};
use super::{LinsolveError, ZERO_PIVOT_REL};

const PIVOT_THRESHOLD: f64 = 0.01;

#[derive(Debug)]
struct LuSymbolic {
    analysis: Analysis,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    entry_ptr: Vec<usize>,
    /// `(value position, permuted row, permuted col)`.
    entries: Vec<(usize, usize, usize)>,
}

/// Reusable symbolic analysis of a square unsymmetric pattern.
#[derive(Debug, Clone)]
pub struct LuSolver {
    sym: Arc<LuSymbolic>,
}

#[derive(Debug, Clone)]
struct Front {
    rows: Vec<usize>,
    cols: Vec<usize>,
    npiv: usize,
    /// Columns `0..npiv` of the front: L below the diagonal, U on and above.
    lcols: Vec<f64>,
    /// Rows `0..npiv` of columns `npiv..nf`, column-major.
    urows: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LuFactor {
    sym: Arc<LuSymbolic>,
    matrix: CscMatrix,
    fronts: Vec<Front>,
    n_delayed: usize,
}

struct Contribution {
    idx: Vec<usize>,
    n_delayed: usize,
    vals: Vec<f64>,
}

impl LuSolver {
    pub fn analyze(a: &CscMatrix) -> Result<Self, LinsolveError> {
        if a.nrows() != a.ncols() {
            return Err(LinsolveError::InvalidMatrix(format!(
                "LU needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.ncols();
        let (cp, ri) = (a.col_ptr(), a.row_idx());
        let adj = Adjacency::from_pairs(
            n,
            (0..n).flat_map(|j| ri[cp[j]..cp[j + 1]].iter().map(move |&i| (i, j))),
        );
        let analysis = analyze(n, &adj)?;
        let ns = analysis.n_supernodes();
        let mut tagged: Vec<(usize, (usize, usize, usize))> = Vec::with_capacity(a.nnz());
        for j in 0..n {
            for p in cp[j]..cp[j + 1] {
                let (r, c) = (analysis.iperm[ri[p]], analysis.iperm[j]);
                tagged.push((analysis.col_sn[r.min(c)], (p, r, c)));
            }
        }
        tagged.sort_unstable_by_key(|t| (t.0, t.1 .2, t.1 .1));
        let mut entry_ptr = vec![0usize; ns + 1];
        for t in &tagged {
            entry_ptr[t.0 + 1] += 1;
        }
        for s in 0..ns {
            entry_ptr[s + 1] += entry_ptr[s];
        }
        Ok(LuSolver {
            sym: Arc::new(LuSymbolic {
                analysis,
                col_ptr: cp.to_vec(),
                row_idx: ri.to_vec(),
                entry_ptr,
                entries: tagged.into_iter().map(|t| t.1).collect(),
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.sym.analysis.n
    }

    pub fn factorize(&self, a: &CscMatrix) -> Result<LuFactor, LinsolveError> {
        let sym = &*self.sym;
        if a.ncols() != sym.analysis.n
            || a.nrows() != sym.analysis.n
            || a.col_ptr() != sym.col_ptr
            || a.row_idx() != sym.row_idx
        {
            return Err(LinsolveError::PatternMismatch);
        }
        if a.values().iter().any(|v| !v.is_finite()) {
            return Err(LinsolveError::Breakdown("non-finite matrix entry".into()));
        }
        let an = &sym.analysis;
        let thr = ZERO_PIVOT_REL * a.max_abs();
        let vals = a.values();
        let ns = an.n_supernodes();
        let mut pos = vec![NONE; an.n];
        let mut contribs: Vec<Option<Contribution>> = (0..ns).map(|_| None).collect();
        let mut fronts = Vec::with_capacity(ns);
        let mut n_delayed = 0;

        for s in 0..ns {
            let (c0, c1) = (an.sn_start[s], an.sn_start[s + 1]);
            let children: Vec<Contribution> =
                an.sn_children[s].iter().map(|&c| contribs[c].take().expect("child processed")).collect();
            let mut idx: Vec<usize> = (c0..c1).collect();
            for ch in &children {
                idx.extend_from_slice(&ch.idx[..ch.n_delayed]);
            }
            let nfs = idx.len();
            for (k, &g) in idx.iter().enumerate() {
                pos[g] = k;
            }
            let entries = &sym.entries[sym.entry_ptr[s]..sym.entry_ptr[s + 1]];
            for &(_, r, c) in entries {
                for g in [r, c] {
                    if pos[g] == NONE {
                        pos[g] = idx.len();
                        idx.push(g);
                    }
                }
            }
            for ch in &children {
                for &g in &ch.idx[ch.n_delayed..] {
                    if pos[g] == NONE {
                        pos[g] = idx.len();
                        idx.push(g);
                    }
                }
            }
            idx[nfs..].sort_unstable();
            for (k, &g) in idx.iter().enumerate().skip(nfs) {
                pos[g] = k;
            }
            let nf = idx.len();
            let mut f = vec![0.0; nf * nf];
            for &(p, r, c) in entries {
                f[pos[r] + pos[c] * nf] += vals[p];
            }
            for ch in &children {
                let nc = ch.idx.len();
                for jj in 0..nc {
                    let j = pos[ch.idx[jj]];
                    for ii in 0..nc {
                        f[pos[ch.idx[ii]] + j * nf] += ch.vals[ii + jj * nc];
                    }
                }
            }
            drop(children);

            let root = an.sn_parent[s] == NONE;
            let mut rows = idx.clone();
            let npiv = if root {
                factor_root(&mut f, nf, &mut rows, thr)?
            } else {
                factor_front(&mut f, nf, nfs, &mut idx, &mut rows)
            };
            let nc = nf - npiv;
            if nc > 0 {
                let mut cvals = vec![0.0; nc * nc];
                for jj in 0..nc {
                    let src = (npiv + jj) * nf + npiv;
                    cvals[jj * nc..(jj + 1) * nc].copy_from_slice(&f[src..src + nc]);
                }
                n_delayed += nfs - npiv;
                contribs[s] = Some(Contribution {
                    idx: idx[npiv..].to_vec(),
                    n_delayed: nfs - npiv,
                    vals: cvals,
                });
            }
            let mut urows = Vec::with_capacity(npiv * nc);
            for j in npiv..nf {
                urows.extend_from_slice(&f[j * nf..j * nf + npiv]);
            }
            for &g in &idx {
                pos[g] = NONE;
            }
            f.truncate(nf * npiv);
            f.shrink_to_fit();
            fronts.push(Front { rows, cols: idx, npiv, lcols: f, urows });
        }
        Ok(LuFactor { sym: Arc::clone(&self.sym), matrix: a.clone(), fronts, n_delayed })
    }
}

fn swap_rows(f: &mut [f64], nf: usize, p: usize, q: usize) {
    if p != q {
        for j in 0..nf {
            f.swap(p + j * nf, q + j * nf);
        }
    }
}

fn swap_cols(f: &mut [f64], nf: usize, p: usize, q: usize) {
    if p != q {
        for i in 0..nf {
            f.swap(i + p * nf, i + q * nf);
        }
    }
}

/// Eliminates pivot `k` and updates columns `k + 1..upto` over all rows.
fn eliminate(f: &mut [f64], nf: usize, k: usize, upto: usize) {
    let piv = f[k + k * nf];
    for i in k + 1..nf {
        f[i + k * nf] /= piv;
    }
    for j in k + 1..upto {
        let u = f[k + j * nf];
        if u == 0.0 {
            continue;
        }
        let (head, tail) = f.split_at_mut(j * nf);
        let colk = &head[k * nf..(k + 1) * nf];
        let colj = &mut tail[..nf];
        for i in k + 1..nf {
            colj[i] -= colk[i] * u;
        }
    }
}

/// Threshold pivoting restricted to the diagonal of the fully summed block.
/// Returns the number of pivots; the rest are delayed.
fn factor_front(f: &mut [f64], nf: usize, nfs: usize, idx: &mut [usize], rows: &mut [usize]) -> usize {
    let mut k = 0;
    while k < nfs {
        let mut found = None;
        for c in k..nfs {
            let a = f[c + c * nf].abs();
            if a == 0.0 {
                continue;
            }
            let m = (k..nf).filter(|&i| i != c).map(|i| f[i + c * nf].abs()).fold(0.0, f64::max);
            if a >= PIVOT_THRESHOLD * m {
                found = Some(c);
                break;
            }
        }
        let Some(c) = found else { break };
        swap_rows(f, nf, k, c);
        swap_cols(f, nf, k, c);
        idx.swap(k, c);
        rows.swap(k, c);
        eliminate(f, nf, k, nfs);
        k += 1;
    }
    let npiv = k;
    // U12 and the Schur complement, one contribution-block column at a time
    for j in nfs..nf {
        let (lpart, tail) = f.split_at_mut(j * nf);
        let colj = &mut tail[..nf];
        for p in 0..npiv {
            let u = colj[p];
            if u == 0.0 {
                continue;
            }
            let colp = &lpart[p * nf..(p + 1) * nf];
            for i in p + 1..nf {
                colj[i] -= colp[i] * u;
            }
        }
    }
    npiv
}

/// Gaussian elimination with partial pivoting on a front whose rows are all
/// fully summed. The diagonal is kept when it passes the threshold test.
fn factor_root(f: &mut [f64], nf: usize, rows: &mut [usize], thr: f64) -> Result<usize, LinsolveError> {
    for k in 0..nf {
        let (mut r, mut m) = (k, 0.0);
        for i in k..nf {
            let v = f[i + k * nf].abs();
            if v > m {
                m = v;
                r = i;
            }
        }
        if m <= thr {
            return Err(LinsolveError::SingularPivot { column: k });
        }
        if f[k + k * nf].abs() >= PIVOT_THRESHOLD * m {
            r = k;
        }
        swap_rows(f, nf, k, r);
        rows.swap(k, r);
        eliminate(f, nf, k, nf);
    }
    Ok(nf)
}

impl LuFactor {
    pub fn dim(&self) -> usize {
        self.sym.analysis.n
    }

    pub fn n_delayed(&self) -> usize {
        self.n_delayed
    }

    fn solve_once(&self, b: &[f64]) -> Vec<f64> {
        let an = &self.sym.analysis;
        let n = an.n;
        let mut y: Vec<f64> = an.perm.iter().map(|&old| b[old]).collect();
        let mut w = vec![0.0; n];
        for fr in &self.fronts {
            let nf = fr.rows.len();
            for p in 0..fr.npiv {
                let z = y[fr.rows[p]];
                w[fr.cols[p]] = z;
                if z != 0.0 {
                    let col = &fr.lcols[p * nf..(p + 1) * nf];
                    for i in p + 1..nf {
                        y[fr.rows[i]] -= col[i] * z;
                    }
                }
            }
        }
        let mut x = vec![0.0; n];
        for fr in self.fronts.iter().rev() {
            let nf = fr.cols.len();
            let np = fr.npiv;
            for p in (0..np).rev() {
                let mut s = w[fr.cols[p]];
                for j in p + 1..np {
                    s -= fr.lcols[p + j * nf] * x[fr.cols[j]];
                }
                for j in np..nf {
                    s -= fr.urows[p + (j - np) * np] * x[fr.cols[j]];
                }
                x[fr.cols[p]] = s / fr.lcols[p + p * nf];
            }
        }
        let mut out = vec![0.0; n];
        for (k, &old) in an.perm.iter().enumerate() {
            out[old] = x[k];
        }
        out
    }

    /// Solves `A x = b` with one step of iterative refinement.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinsolveError> {
        let n = self.dim();
        if b.len() != n {
            return Err(LinsolveError::DimensionMismatch { expected: n, found: b.len() });
        }
        let mut x = self.solve_once(b);
        let ax = self.matrix.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let dx = self.solve_once(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LinsolveError::Breakdown("non-finite solution".into()));
        }
        Ok(x)
    }
}
