//! Multifrontal symmetric-indefinite LDLT with 1x1/2x2 threshold pivoting
//! and delayed pivots. The factorization reports the inertia of `A + tau I`.

use std::sync::Arc;

use super::sparse::SparseSymmetric;
use super::symbolic::{analyze, Adjacency, Analysis, NONE};
use super::{Inertia, LinsolveError, ZERO_PIVOT_REL};

/// Threshold for accepting a pivot inside a non-root front.
const PIVOT_THRESHOLD: f64 = 0.01;
/// Bunch-Kaufman constant `(1 + sqrt(17)) / 8`.
const BK_ALPHA: f64 = 0.640_388_203_202_208_4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PivotBlock {
    One(f64),
    /// Symmetric 2x2 block `[[a, b], [b, c]]`.
    Two(f64, f64, f64),
}

#[derive(Debug)]
struct LdltSymbolic {
    analysis: Analysis,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    /// Entries of each supernode as `(value position, permuted row, permuted col)`
    /// with row >= col.
    entry_ptr: Vec<usize>,
    entries: Vec<(usize, usize, usize)>,
}

/// Symbolic analysis of a symmetric pattern, reusable for any values and
/// shifts on that pattern.
#[derive(Debug, Clone)]
pub struct LdltSolver {
    sym: Arc<LdltSymbolic>,
}

#[derive(Debug, Clone)]
struct Front {
    idx: Vec<usize>,
    npiv: usize,
    /// Column-major `nf x npiv` unit lower factor.
    l: Vec<f64>,
    d: Vec<PivotBlock>,
}

/// Numeric factorization `P (A + tau I) P^T = L D L^T`.
#[derive(Debug, Clone)]
pub struct LdltFactor {
    sym: Arc<LdltSymbolic>,
    matrix: SparseSymmetric,
    tau: f64,
    fronts: Vec<Front>,
    inertia: Inertia,
    n_delayed: usize,
    zero_threshold: f64,
}

struct Contribution {
    idx: Vec<usize>,
    n_delayed: usize,
    vals: Vec<f64>,
}

impl LdltSolver {
    pub fn analyze(a: &SparseSymmetric) -> Result<Self, LinsolveError> {
        let n = a.dim();
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
                let (ni, nj) = (analysis.iperm[ri[p]], analysis.iperm[j]);
                let (r, c) = (ni.max(nj), ni.min(nj));
                tagged.push((analysis.col_sn[c], (p, r, c)));
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
        Ok(LdltSolver {
            sym: Arc::new(LdltSymbolic {
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

    pub fn n_supernodes(&self) -> usize {
        self.sym.analysis.n_supernodes()
    }

    /// Factor nonzeros predicted by the symbolic phase (no delays).
    pub fn predicted_nnz(&self) -> usize {
        self.sym.analysis.predicted_nnz
    }

    /// Factorizes `A + tau I`. The pattern of `a` must match the analysed one.
    pub fn factorize(&self, a: &SparseSymmetric, tau: f64) -> Result<LdltFactor, LinsolveError> {
        let sym = &*self.sym;
        if a.dim() != sym.analysis.n || a.col_ptr() != sym.col_ptr || a.row_idx() != sym.row_idx {
            return Err(LinsolveError::PatternMismatch);
        }
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(LinsolveError::InvalidShift(tau));
        }
        if a.values().iter().any(|v| !v.is_finite()) {
            return Err(LinsolveError::Breakdown("non-finite matrix entry".into()));
        }
        let an = &sym.analysis;
        let n = an.n;
        let thr = ZERO_PIVOT_REL * a.max_abs_shifted(tau);
        let vals = a.values();
        let ns = an.n_supernodes();
        let mut pos = vec![NONE; n];
        let mut contribs: Vec<Option<Contribution>> = (0..ns).map(|_| None).collect();
        let mut fronts = Vec::with_capacity(ns);
        let mut inertia = Inertia::default();
        let mut n_delayed = 0usize;

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
            for &(_, r, _) in entries {
                if pos[r] == NONE {
                    pos[r] = idx.len();
                    idx.push(r);
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
                let (i, j) = (pos[r], pos[c]);
                let (i, j) = if i >= j { (i, j) } else { (j, i) };
                f[i + j * nf] += vals[p];
            }
            if tau != 0.0 {
                for k in 0..(c1 - c0) {
                    f[k + k * nf] += tau;
                }
            }
            for ch in &children {
                let nc = ch.idx.len();
                for jj in 0..nc {
                    let gj = pos[ch.idx[jj]];
                    for ii in jj..nc {
                        let gi = pos[ch.idx[ii]];
                        let (i, j) = if gi >= gj { (gi, gj) } else { (gj, gi) };
                        f[i + j * nf] += ch.vals[ii + jj * nc];
                    }
                }
            }
            drop(children);

            let root = an.sn_parent[s] == NONE;
            debug_assert!(!root || nf == nfs);
            let (npiv, d) = factor_front(&mut f, nf, nfs, &mut idx, root, thr, &mut inertia)?;

            let nc = nf - npiv;
            if nc > 0 {
                let mut cvals = vec![0.0; nc * nc];
                for jj in 0..nc {
                    let src = (npiv + jj) * nf + npiv;
                    cvals[jj * nc + jj..(jj + 1) * nc].copy_from_slice(&f[src + jj..src + nc]);
                }
                n_delayed += nfs - npiv;
                contribs[s] = Some(Contribution {
                    idx: idx[npiv..].to_vec(),
                    n_delayed: nfs - npiv,
                    vals: cvals,
                });
            }
            for &g in &idx {
                pos[g] = NONE;
            }
            f.truncate(nf * npiv);
            f.shrink_to_fit();
            fronts.push(Front { idx, npiv, l: f, d });
        }
        debug_assert_eq!(inertia.dim(), n);
        Ok(LdltFactor {
            sym: Arc::clone(&self.sym),
            matrix: a.clone(),
            tau,
            fronts,
            inertia,
            n_delayed,
            zero_threshold: thr,
        })
    }
}

#[inline]
fn at(f: &[f64], nf: usize, i: usize, j: usize) -> f64 {
    if i >= j {
        f[i + j * nf]
    } else {
        f[j + i * nf]
    }
}

/// Largest off-diagonal magnitude of active column `c` (rows `k..nf`)
/// skipping `skip`, and the fully summed row attaining the largest value.
fn col_max(f: &[f64], nf: usize, nfs: usize, k: usize, c: usize, skip: usize) -> (f64, usize) {
    let mut m = 0.0;
    let mut m_fs = -1.0;
    let mut arg = NONE;
    for i in k..nf {
        if i == c || i == skip {
            continue;
        }
        let v = at(f, nf, i, c).abs();
        if v > m {
            m = v;
        }
        if i < nfs && v > m_fs {
            m_fs = v;
            arg = i;
        }
    }
    (m, arg)
}

/// Symmetric row/column interchange of `p < q` in lower storage.
fn swap_sym(f: &mut [f64], nf: usize, p: usize, q: usize) {
    if p == q {
        return;
    }
    let (p, q) = (p.min(q), p.max(q));
    for j in 0..p {
        f.swap(p + j * nf, q + j * nf);
    }
    f.swap(p + p * nf, q + q * nf);
    for j in p + 1..q {
        f.swap(j + p * nf, q + j * nf);
    }
    for i in q + 1..nf {
        f.swap(i + p * nf, i + q * nf);
    }
}

fn count_eig(inertia: &mut Inertia, mu: f64, thr: f64) {
    if mu > thr {
        inertia.n_pos += 1;
    } else if mu < -thr {
        inertia.n_neg += 1;
    } else {
        inertia.n_zero += 1;
    }
}

enum Choice {
    Zero,
    One,
    Two(usize),
}

/// Partial factorization of the fully summed block of a front. Returns the
/// number of eliminated pivots and their D blocks; the trailing part of `f`
/// holds the Schur complement afterwards.
fn factor_front(
    f: &mut [f64],
    nf: usize,
    nfs: usize,
    idx: &mut [usize],
    root: bool,
    thr: f64,
    inertia: &mut Inertia,
) -> Result<(usize, Vec<PivotBlock>), LinsolveError> {
    let mut d = Vec::new();
    let mut k = 0;
    while k < nfs {
        let mut picked: Option<(usize, Choice)> = None;
        if root {
            picked = Some(bunch_kaufman(f, nf, k, thr));
        } else {
            for c in k..nfs {
                let a = at(f, nf, c, c);
                let (gamma, r) = col_max(f, nf, nfs, k, c, NONE);
                if gamma <= thr && a.abs() <= thr {
                    picked = Some((c, Choice::Zero));
                    break;
                }
                if a != 0.0 && a.abs() >= PIVOT_THRESHOLD * gamma {
                    picked = Some((c, Choice::One));
                    break;
                }
                if r != NONE {
                    let b = at(f, nf, r, c);
                    let e = at(f, nf, r, r);
                    let det = a * e - b * b;
                    let (gc, _) = col_max(f, nf, nfs, k, c, r);
                    let (gr, _) = col_max(f, nf, nfs, k, r, c);
                    let ok = det != 0.0
                        && (e.abs() * gc + b.abs() * gr) * PIVOT_THRESHOLD <= det.abs()
                        && (b.abs() * gc + a.abs() * gr) * PIVOT_THRESHOLD <= det.abs();
                    if ok {
                        picked = Some((c, Choice::Two(r)));
                        break;
                    }
                }
            }
        }
        let Some((c, choice)) = picked else { break };
        match choice {
            Choice::Zero => {
                swap_sym(f, nf, k, c);
                idx.swap(k, c);
                for i in k..nf {
                    f[i + k * nf] = 0.0;
                }
                inertia.n_zero += 1;
                d.push(PivotBlock::One(0.0));
                k += 1;
            }
            Choice::One => {
                swap_sym(f, nf, k, c);
                idx.swap(k, c);
                let piv = f[k + k * nf];
                if !piv.is_finite() || piv == 0.0 {
                    return Err(LinsolveError::Breakdown(format!("invalid 1x1 pivot {piv}")));
                }
                for j in k + 1..nfs {
                    let m = f[j + k * nf] / piv;
                    if m != 0.0 {
                        let (head, tail) = f.split_at_mut(j * nf);
                        let colk = &head[k * nf..k * nf + nf];
                        let colj = &mut tail[..nf];
                        for i in j..nf {
                            colj[i] -= colk[i] * m;
                        }
                    }
                }
                for i in k + 1..nf {
                    f[i + k * nf] /= piv;
                }
                f[k + k * nf] = 1.0;
                count_eig(inertia, piv, thr);
                d.push(PivotBlock::One(piv));
                k += 1;
            }
            Choice::Two(r) => {
                swap_sym(f, nf, k, c);
                idx.swap(k, c);
                // `r` may have been moved by the first interchange
                let r = if r == k { c } else { r };
                swap_sym(f, nf, k + 1, r);
                idx.swap(k + 1, r);
                let a = f[k + k * nf];
                let b = f[k + 1 + k * nf];
                let e = f[k + 1 + (k + 1) * nf];
                let det = a * e - b * b;
                if !det.is_finite() || det == 0.0 {
                    return Err(LinsolveError::Breakdown(format!("singular 2x2 pivot, det {det}")));
                }
                for j in k + 2..nfs {
                    let (w0, w1) = (f[j + k * nf], f[j + (k + 1) * nf]);
                    let l0 = (w0 * e - w1 * b) / det;
                    let l1 = (w1 * a - w0 * b) / det;
                    if l0 == 0.0 && l1 == 0.0 {
                        continue;
                    }
                    let (head, tail) = f.split_at_mut(j * nf);
                    let colk = &head[k * nf..k * nf + nf];
                    let colk1 = &head[(k + 1) * nf..(k + 1) * nf + nf];
                    let colj = &mut tail[..nf];
                    for i in j..nf {
                        colj[i] -= colk[i] * l0 + colk1[i] * l1;
                    }
                }
                for i in k + 2..nf {
                    let (w0, w1) = (f[i + k * nf], f[i + (k + 1) * nf]);
                    f[i + k * nf] = (w0 * e - w1 * b) / det;
                    f[i + (k + 1) * nf] = (w1 * a - w0 * b) / det;
                }
                f[k + k * nf] = 1.0;
                f[k + 1 + k * nf] = 0.0;
                f[k + 1 + (k + 1) * nf] = 1.0;
                let mean = 0.5 * (a + e);
                let rad = (0.5 * (a - e)).hypot(b);
                count_eig(inertia, mean + rad, thr);
                count_eig(inertia, mean - rad, thr);
                d.push(PivotBlock::Two(a, b, e));
                k += 2;
            }
        }
    }
    let npiv = k;
    if root && npiv < nfs {
        return Err(LinsolveError::Breakdown("root front left pivots uneliminated".into()));
    }
    schur_update(f, nf, nfs, npiv, &d);
    Ok((npiv, d))
}

/// Bunch-Kaufman choice for column `k` of a front whose rows are all fully
/// summed.
fn bunch_kaufman(f: &[f64], nf: usize, k: usize, thr: f64) -> (usize, Choice) {
    let a = at(f, nf, k, k).abs();
    let (lambda, r) = col_max(f, nf, nf, k, k, NONE);
    if lambda <= thr && a <= thr {
        return (k, Choice::Zero);
    }
    if a >= BK_ALPHA * lambda {
        return (k, Choice::One);
    }
    let (sigma, _) = col_max(f, nf, nf, k, r, NONE);
    if a * sigma >= BK_ALPHA * lambda * lambda {
        (k, Choice::One)
    } else if at(f, nf, r, r).abs() >= BK_ALPHA * sigma {
        (r, Choice::One)
    } else {
        (k, Choice::Two(r))
    }
}

/// Applies the eliminated pivots to the contribution block (rows and
/// columns `nfs..nf`).
fn schur_update(f: &mut [f64], nf: usize, nfs: usize, npiv: usize, d: &[PivotBlock]) {
    let ncb = nf - nfs;
    if ncb == 0 || npiv == 0 {
        return;
    }
    // w[(j - nfs) + p * ncb] = (L D)[j, p]
    let mut w = vec![0.0; ncb * npiv];
    let mut p = 0;
    for blk in d {
        match *blk {
            PivotBlock::One(dv) => {
                for j in 0..ncb {
                    w[j + p * ncb] = f[nfs + j + p * nf] * dv;
                }
                p += 1;
            }
            PivotBlock::Two(a, b, e) => {
                for j in 0..ncb {
                    let (l0, l1) = (f[nfs + j + p * nf], f[nfs + j + (p + 1) * nf]);
                    w[j + p * ncb] = l0 * a + l1 * b;
                    w[j + (p + 1) * ncb] = l0 * b + l1 * e;
                }
                p += 2;
            }
        }
    }
    let (lpart, cpart) = f.split_at_mut(nfs * nf);
    for jj in 0..ncb {
        let j = nfs + jj;
        let colj = &mut cpart[jj * nf + j..(jj + 1) * nf];
        let col = |p: usize| &lpart[p * nf + j..(p + 1) * nf];
        // Four pivots per sweep so the target column is streamed once per block.
        let mut p = 0;
        while p + 4 <= npiv {
            let wv = [w[jj + p * ncb], w[jj + (p + 1) * ncb], w[jj + (p + 2) * ncb], w[jj + (p + 3) * ncb]];
            if wv != [0.0; 4] {
                let (c0, c1, c2, c3) = (col(p), col(p + 1), col(p + 2), col(p + 3));
                for ((((x, a), b), c), e) in colj.iter_mut().zip(c0).zip(c1).zip(c2).zip(c3) {
                    *x -= a * wv[0] + b * wv[1] + c * wv[2] + e * wv[3];
                }
            }
            p += 4;
        }
        for p in p..npiv {
            let wv = w[jj + p * ncb];
            if wv != 0.0 {
                for (x, a) in colj.iter_mut().zip(col(p)) {
                    *x -= a * wv;
                }
            }
        }
    }
}

impl LdltFactor {
    pub fn inertia(&self) -> Inertia {
        self.inertia
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.sym.analysis.n
    }

    /// Pivots passed from a front to its parent because no stable pivot was
    /// available, summed over all fronts.
    pub fn n_delayed(&self) -> usize {
        self.n_delayed
    }

    pub fn zero_threshold(&self) -> f64 {
        self.zero_threshold
    }

    /// Stored off-diagonal entries of the factor.
    pub fn factor_nnz(&self) -> usize {
        self.fronts
            .iter()
            .map(|fr| {
                let nf = fr.idx.len();
                (0..fr.npiv).map(|p| nf - p - 1).sum::<usize>()
            })
            .sum()
    }

    /// The D blocks in pivot order.
    pub fn pivot_blocks(&self) -> Vec<PivotBlock> {
        self.fronts.iter().flat_map(|f| f.d.iter().copied()).collect()
    }

    fn solve_in_place(&self, y: &mut [f64]) {
        for fr in &self.fronts {
            let nf = fr.idx.len();
            for p in 0..fr.npiv {
                let yp = y[fr.idx[p]];
                if yp != 0.0 {
                    let col = &fr.l[p * nf..(p + 1) * nf];
                    for i in p + 1..nf {
                        y[fr.idx[i]] -= col[i] * yp;
                    }
                }
            }
        }
        for fr in &self.fronts {
            let mut p = 0;
            for blk in &fr.d {
                match *blk {
                    PivotBlock::One(dv) => {
                        y[fr.idx[p]] /= dv;
                        p += 1;
                    }
                    PivotBlock::Two(a, b, e) => {
                        let (i0, i1) = (fr.idx[p], fr.idx[p + 1]);
                        let det = a * e - b * b;
                        let (y0, y1) = (y[i0], y[i1]);
                        y[i0] = (e * y0 - b * y1) / det;
                        y[i1] = (a * y1 - b * y0) / det;
                        p += 2;
                    }
                }
            }
        }
        for fr in self.fronts.iter().rev() {
            let nf = fr.idx.len();
            for p in (0..fr.npiv).rev() {
                let col = &fr.l[p * nf..(p + 1) * nf];
                let mut s = 0.0;
                for i in p + 1..nf {
                    s += col[i] * y[fr.idx[i]];
                }
                y[fr.idx[p]] -= s;
            }
        }
    }

    fn solve_once(&self, b: &[f64]) -> Vec<f64> {
        let an = &self.sym.analysis;
        let mut y: Vec<f64> = an.perm.iter().map(|&old| b[old]).collect();
        self.solve_in_place(&mut y);
        let mut x = vec![0.0; an.n];
        for (k, &old) in an.perm.iter().enumerate() {
            x[old] = y[k];
        }
        x
    }

    /// Solves `(A + tau I) x = b` with one step of iterative refinement.
    /// Refused when the factorization detected zero pivots.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinsolveError> {
        let n = self.dim();
        if b.len() != n {
            return Err(LinsolveError::DimensionMismatch { expected: n, found: b.len() });
        }
        if self.inertia.n_zero > 0 {
            return Err(LinsolveError::Singular { n_zero: self.inertia.n_zero });
        }
        let mut x = self.solve_once(b);
        let ax = self.matrix.mul_vec_shifted(&x, self.tau);
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
