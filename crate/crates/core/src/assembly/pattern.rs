//! Global sparsity patterns of the coupled `3m x 3m` system and per-element
//! scatter positions into their value arrays.

use super::kernel::NLOC;

/// Global DOFs of an element in local order.
pub(crate) fn element_dofs(conn: &[usize; 4], n_nodes: usize) -> [usize; NLOC] {
    let mut g = [0usize; NLOC];
    for a in 0..4 {
        g[2 * a] = 2 * conn[a];
        g[2 * a + 1] = 2 * conn[a] + 1;
        g[8 + a] = 2 * n_nodes + conn[a];
    }
    g
}

/// Sorted, deduplicated node neighbourhoods (each node includes itself).
fn node_neighbours(elements: &[[usize; 4]], n_nodes: usize) -> Vec<Vec<usize>> {
    let mut nb: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    for conn in elements {
        for &a in conn {
            nb[a].extend_from_slice(conn);
        }
    }
    for v in &mut nb {
        v.sort_unstable();
        v.dedup();
    }
    nb
}

pub(crate) struct Pattern {
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
}

impl Pattern {
    fn find(&self, row: usize, col: usize) -> usize {
        let s = self.col_ptr[col];
        let rows = &self.row_idx[s..self.col_ptr[col + 1]];
        s + rows.binary_search(&row).expect("entry present in pattern")
    }
}

/// Column structure of the coupled system; `lower` keeps rows `>= col` only.
pub(crate) fn build_pattern(elements: &[[usize; 4]], n_nodes: usize, lower: bool) -> Pattern {
    let nb = node_neighbours(elements, n_nodes);
    let n = 3 * n_nodes;
    let mut col_ptr = Vec::with_capacity(n + 1);
    let mut row_idx = Vec::new();
    col_ptr.push(0);
    let push_col = |node: usize, col: usize, row_idx: &mut Vec<usize>| {
        for &a in &nb[node] {
            for r in [2 * a, 2 * a + 1] {
                if !lower || r >= col {
                    row_idx.push(r);
                }
            }
        }
        for &a in &nb[node] {
            let r = 2 * n_nodes + a;
            if !lower || r >= col {
                row_idx.push(r);
            }
        }
    };
    for node in 0..n_nodes {
        for c in 0..2 {
            push_col(node, 2 * node + c, &mut row_idx);
            col_ptr.push(row_idx.len());
        }
    }
    for node in 0..n_nodes {
        push_col(node, 2 * n_nodes + node, &mut row_idx);
        col_ptr.push(row_idx.len());
    }
    Pattern { col_ptr, row_idx }
}

/// Value positions of every local pair `(p, q)` as `p * NLOC + q`. For a
/// lower pattern both `(p, q)` and `(q, p)` map to the stored entry.
pub(crate) fn scatter_table(
    pattern: &Pattern,
    elements: &[[usize; 4]],
    n_nodes: usize,
    lower: bool,
) -> Vec<[u32; NLOC * NLOC]> {
    assert!(pattern.row_idx.len() < u32::MAX as usize, "pattern too large for 32-bit scatter");
    elements
        .iter()
        .map(|conn| {
            let g = element_dofs(conn, n_nodes);
            let mut t = [0u32; NLOC * NLOC];
            for p in 0..NLOC {
                for q in 0..NLOC {
                    let (r, c) = if lower && g[p] < g[q] { (g[q], g[p]) } else { (g[p], g[q]) };
                    t[p * NLOC + q] = pattern.find(r, c) as u32;
                }
            }
            t
        })
        .collect()
}
