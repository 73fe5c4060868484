use super::LinsolveError;

/// Symmetric matrix stored as its lower triangle in compressed sparse
/// column form. Row indices are sorted within each column and unique.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

/// General square or rectangular matrix in compressed sparse column form.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

fn check_csc(
    nrows: usize,
    ncols: usize,
    col_ptr: &[usize],
    row_idx: &[usize],
    n_values: usize,
    lower: bool,
) -> Result<(), LinsolveError> {
    let bad = |m: String| Err(LinsolveError::InvalidMatrix(m));
    if col_ptr.len() != ncols + 1 || col_ptr[0] != 0 {
        return bad("column pointer has wrong length or does not start at 0".into());
    }
    if col_ptr[ncols] != row_idx.len() || row_idx.len() != n_values {
        return bad("index and value arrays disagree with column pointers".into());
    }
    for j in 0..ncols {
        let (s, e) = (col_ptr[j], col_ptr[j + 1]);
        if s > e {
            return bad(format!("column pointers decrease at column {j}"));
        }
        let rows = &row_idx[s..e];
        if rows.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("column {j} has unsorted or duplicate rows"));
        }
        if let Some(&r) = rows.last() {
            if r >= nrows {
                return bad(format!("row index {r} out of range in column {j}"));
            }
        }
        if lower && rows.first().is_some_and(|&r| r < j) {
            return bad(format!("column {j} has entries above the diagonal"));
        }
    }
    Ok(())
}

/// Sorts `(row, col, value)` triplets column-major and sums duplicates.
fn compress(ncols: usize, mut t: Vec<(usize, usize, f64)>) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    t.sort_unstable_by_key(|&(i, j, _)| (j, i));
    let mut col_ptr = vec![0usize; ncols + 1];
    let mut row_idx: Vec<usize> = Vec::with_capacity(t.len());
    let mut values: Vec<f64> = Vec::with_capacity(t.len());
    let mut last: Option<(usize, usize)> = None;
    for (i, j, v) in t {
        if last == Some((i, j)) {
            *values.last_mut().unwrap() += v;
        } else {
            row_idx.push(i);
            values.push(v);
            col_ptr[j + 1] += 1;
            last = Some((i, j));
        }
    }
    for j in 0..ncols {
        col_ptr[j + 1] += col_ptr[j];
    }
    (col_ptr, row_idx, values)
}

impl SparseSymmetric {
    pub fn new(
        n: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, LinsolveError> {
        check_csc(n, n, &col_ptr, &row_idx, values.len(), true)?;
        Ok(SparseSymmetric { n, col_ptr, row_idx, values })
    }

    /// Builds from triplets; entries above the diagonal are mirrored into the
    /// lower triangle and duplicates are summed. Callers should give each
    /// off-diagonal pair once.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self, LinsolveError> {
        let mut t = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(LinsolveError::InvalidMatrix(format!(
                    "entry ({i}, {j}) outside a {n}x{n} matrix"
                )));
            }
            t.push((i.max(j), i.min(j), v));
        }
        let (col_ptr, row_idx, values) = compress(n, t);
        Ok(SparseSymmetric { n, col_ptr, row_idx, values })
    }

    pub fn identity(n: usize) -> Self {
        SparseSymmetric {
            n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::identity(d.len());
        m.values.copy_from_slice(d);
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn same_pattern(&self, other: &SparseSymmetric) -> bool {
        self.n == other.n && self.col_ptr == other.col_ptr && self.row_idx == other.row_idx
    }

    /// Largest absolute entry of `A + tau I`.
    pub fn max_abs_shifted(&self, tau: f64) -> f64 {
        let mut m: f64 = if tau != 0.0 { tau.abs() } else { 0.0 };
        for j in 0..self.n {
            let mut diag_seen = false;
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let v = if self.row_idx[p] == j {
                    diag_seen = true;
                    self.values[p] + tau
                } else {
                    self.values[p]
                };
                m = m.max(v.abs());
            }
            if !diag_seen {
                m = m.max(tau.abs());
            }
        }
        m
    }

    /// `y = (A + tau I) x`.
    pub fn mul_vec_shifted(&self, x: &[f64], tau: f64) -> Vec<f64> {
        let mut y: Vec<f64> = x.iter().map(|v| tau * v).collect();
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                let v = self.values[p];
                y[i] += v * x[j];
                if i != j {
                    y[j] += v * x[i];
                }
            }
        }
        y
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.mul_vec_shifted(x, 0.0)
    }

    /// Infinity norm of `A + tau I` (maximum absolute row sum).
    pub fn norm_inf_shifted(&self, tau: f64) -> f64 {
        let mut rows = vec![0.0; self.n];
        let mut diag = vec![tau; self.n];
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                if i == j {
                    diag[j] += self.values[p];
                } else {
                    rows[i] += self.values[p].abs();
                    rows[j] += self.values[p].abs();
                }
            }
        }
        rows.iter().zip(&diag).map(|(r, d)| r + d.abs()).fold(0.0, f64::max)
    }

    /// Row-major dense copy with both triangles filled.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                d[i][j] = self.values[p];
                d[j][i] = self.values[p];
            }
        }
        d
    }
}

impl CscMatrix {
    pub fn new(
        nrows: usize,
        ncols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, LinsolveError> {
        check_csc(nrows, ncols, &col_ptr, &row_idx, values.len(), false)?;
        Ok(CscMatrix { nrows, ncols, col_ptr, row_idx, values })
    }

    /// Builds from triplets, summing duplicates.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, LinsolveError> {
        if let Some(&(i, j, _)) = triplets.iter().find(|&&(i, j, _)| i >= nrows || j >= ncols) {
            return Err(LinsolveError::InvalidMatrix(format!(
                "entry ({i}, {j}) outside a {nrows}x{ncols} matrix"
            )));
        }
        let (col_ptr, row_idx, values) = compress(ncols, triplets.to_vec());
        Ok(CscMatrix { nrows, ncols, col_ptr, row_idx, values })
    }

    pub fn identity(n: usize) -> Self {
        CscMatrix {
            nrows: n,
            ncols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn same_pattern(&self, other: &CscMatrix) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.col_ptr == other.col_ptr
            && self.row_idx == other.row_idx
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for j in 0..self.ncols {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[p]] += self.values[p] * x[j];
            }
        }
        y
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn norm_inf(&self) -> f64 {
        let mut rows = vec![0.0; self.nrows];
        for (p, &i) in self.row_idx.iter().enumerate() {
            rows[i] += self.values[p].abs();
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for j in 0..self.ncols {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                d[self.row_idx[p]][j] = self.values[p];
            }
        }
        d
    }
}
