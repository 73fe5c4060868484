//! Ordering and supernodal elimination tree shared by the LDLT and LU
//! factorizations.

use super::LinsolveError;

pub(crate) const NONE: usize = usize::MAX;

/// Supernodes with at most this many columns absorb their contiguous child.
const RELAX_COLUMNS: usize = 16;

#[derive(Debug, Clone)]
pub(crate) struct Analysis {
    pub n: usize,
    /// `perm[new] = old`.
    pub perm: Vec<usize>,
    /// `iperm[old] = new`.
    pub iperm: Vec<usize>,
    /// Supernode `s` owns permuted columns `sn_start[s]..sn_start[s + 1]`.
    pub sn_start: Vec<usize>,
    pub sn_parent: Vec<usize>,
    pub sn_children: Vec<Vec<usize>>,
    /// Supernode owning each permuted column.
    pub col_sn: Vec<usize>,
    /// Off-diagonal nonzeros of the Cholesky factor without pivoting delays.
    pub predicted_nnz: usize,
}

impl Analysis {
    pub fn n_supernodes(&self) -> usize {
        self.sn_parent.len()
    }
}

/// Symmetric adjacency (no diagonal) of the pattern `A + A^T`, in CSC form
/// with both triangles present.
pub(crate) struct Adjacency {
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
}

impl Adjacency {
    /// Builds from off-diagonal pairs; each pair may be listed in either or
    /// both orientations.
    pub fn from_pairs(n: usize, pairs: impl Iterator<Item = (usize, usize)>) -> Self {
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, j) in pairs {
            if i != j {
                cols[j].push(i);
                cols[i].push(j);
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for mut c in cols {
            c.sort_unstable();
            c.dedup();
            row_idx.extend_from_slice(&c);
            col_ptr.push(row_idx.len());
        }
        Adjacency { col_ptr, row_idx }
    }
}

/// Elimination tree of a symmetric pattern given as, for each column `k`,
/// the rows `i < k` of its upper triangle.
fn etree(n: usize, upper: &[Vec<usize>]) -> Vec<usize> {
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for &i0 in &upper[k] {
            let mut i = i0;
            while i != NONE && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == NONE {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }
    parent
}

/// Depth-first postorder of a forest; children are visited in increasing
/// order. Returns `post[k]` = node visited k-th.
fn postorder(parent: &[usize]) -> Vec<usize> {
    let n = parent.len();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut roots = Vec::new();
    for (j, &p) in parent.iter().enumerate() {
        if p == NONE {
            roots.push(j);
        } else {
            children[p].push(j);
        }
    }
    let mut post = Vec::with_capacity(n);
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for r in roots {
        stack.push((r, 0));
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if *next < children[node].len() {
                let c = children[node][*next];
                *next += 1;
                stack.push((c, 0));
            } else {
                post.push(node);
                stack.pop();
            }
        }
    }
    post
}

fn permuted_upper(adj: &Adjacency, iperm: &[usize]) -> Vec<Vec<usize>> {
    let n = iperm.len();
    let mut upper: Vec<Vec<usize>> = vec![Vec::new(); n];
    for j in 0..n {
        let nj = iperm[j];
        for &i in &adj.row_idx[adj.col_ptr[j]..adj.col_ptr[j + 1]] {
            let ni = iperm[i];
            if ni < nj {
                upper[nj].push(ni);
            }
        }
    }
    upper
}

/// Off-diagonal column counts of the Cholesky factor via row subtrees.
fn column_counts(parent: &[usize], upper: &[Vec<usize>]) -> Vec<usize> {
    let n = parent.len();
    let mut count = vec![0usize; n];
    let mut mark = vec![NONE; n];
    for k in 0..n {
        mark[k] = k;
        for &i in &upper[k] {
            let mut j = i;
            while mark[j] != k {
                mark[j] = k;
                count[j] += 1;
                j = parent[j];
            }
        }
    }
    count
}

/// Fill-reducing ordering, postordered elimination tree and relaxed
/// supernode partition of the pattern in `adj`.
pub(crate) fn analyze(n: usize, adj: &Adjacency) -> Result<Analysis, LinsolveError> {
    let amd_perm: Vec<usize> = if n == 0 {
        Vec::new()
    } else {
        // The diagonal is ignored by the ordering, but listing it keeps the
        // entry count at least n, which the crate's internal checks assume.
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::with_capacity(adj.row_idx.len() + n);
        col_ptr.push(0);
        for j in 0..n {
            let col = &adj.row_idx[adj.col_ptr[j]..adj.col_ptr[j + 1]];
            let split = col.partition_point(|&i| i < j);
            row_idx.extend_from_slice(&col[..split]);
            row_idx.push(j);
            row_idx.extend_from_slice(&col[split..]);
            col_ptr.push(row_idx.len());
        }
        let control = amd::Control::default();
        let (p, _, _) = amd::order::<usize>(n, &col_ptr, &row_idx, &control)
            .map_err(|s| LinsolveError::InvalidMatrix(format!("ordering failed: {s:?}")))?;
        p
    };
    let mut iperm = vec![0usize; n];
    for (k, &old) in amd_perm.iter().enumerate() {
        iperm[old] = k;
    }
    let parent0 = etree(n, &permuted_upper(adj, &iperm));
    let post = postorder(&parent0);
    let perm: Vec<usize> = post.iter().map(|&k| amd_perm[k]).collect();
    for (k, &old) in perm.iter().enumerate() {
        iperm[old] = k;
    }
    let upper = permuted_upper(adj, &iperm);
    let parent = etree(n, &upper);
    let counts = column_counts(&parent, &upper);

    let mut n_children = vec![0usize; n];
    for &p in &parent {
        if p != NONE {
            n_children[p] += 1;
        }
    }
    // fundamental supernodes
    let mut starts = Vec::new();
    for j in 0..n {
        let joins_previous = j > 0
            && parent[j - 1] == j
            && n_children[j] == 1
            && counts[j - 1] == counts[j] + 1;
        if !joins_previous {
            starts.push(j);
        }
    }
    starts.push(n);
    let nf = starts.len() - 1;
    let mut fcol_sn = vec![0usize; n];
    for s in 0..nf {
        for j in starts[s]..starts[s + 1] {
            fcol_sn[j] = s;
        }
    }
    let fparent = |s: usize| {
        let p = parent[starts[s + 1] - 1];
        if p == NONE {
            NONE
        } else {
            fcol_sn[p]
        }
    };

    // relaxed amalgamation along contiguous chains
    let mut sn_start: Vec<usize> = Vec::with_capacity(nf + 1);
    for s in 0..nf {
        let width = starts[s + 1] - starts[s];
        let absorb = s > 0 && fparent(s - 1) == s && {
            let group_start = *sn_start.last().unwrap();
            starts[s] - group_start + width <= RELAX_COLUMNS
        };
        if !absorb {
            sn_start.push(starts[s]);
        }
    }
    sn_start.push(n);
    let ns = sn_start.len() - 1;
    let mut col_sn = vec![0usize; n];
    for s in 0..ns {
        for j in sn_start[s]..sn_start[s + 1] {
            col_sn[j] = s;
        }
    }
    let mut sn_parent = vec![NONE; ns];
    let mut sn_children = vec![Vec::new(); ns];
    for s in 0..ns {
        let p = parent[sn_start[s + 1] - 1];
        if p != NONE {
            sn_parent[s] = col_sn[p];
            sn_children[col_sn[p]].push(s);
        }
    }
    Ok(Analysis {
        n,
        perm,
        iperm,
        sn_start,
        sn_parent,
        sn_children,
        col_sn,
        predicted_nnz: counts.iter().sum(),
    })
}
