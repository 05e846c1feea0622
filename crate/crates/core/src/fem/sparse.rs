use crate::error::{Error, Result};

/// Square matrix in compressed-row layout. Column indices within a row are
/// sorted and unique.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a zero matrix from per-row column lists (deduplicated here).
    pub fn from_rows(mut rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for row in rows.iter_mut() {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        CsrMatrix { n, row_ptr, col_idx, values: vec![0.0; nnz] }
    }

    /// From `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows = vec![Vec::new(); n];
        for &(r, c, _) in triplets {
            rows[r].push(c);
        }
        let mut m = Self::from_rows(rows);
        for &(r, c, v) in triplets {
            let k = m.position(r, c).expect("entry in pattern");
            m.values[k] += v;
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::from_rows((0..n).map(|i| vec![i]).collect());
        m.values.iter_mut().for_each(|v| *v = 1.0);
        m
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[lo..hi].binary_search(&j).ok().map(|k| lo + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.n == other.n && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }

    /// `self += alpha * other`; both must share a sparsity pattern.
    pub fn add_scaled(&mut self, alpha: f64, other: &CsrMatrix) {
        assert!(self.same_pattern(other), "sparsity patterns differ");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                triplets.push((j, i, v));
            }
        }
        CsrMatrix::from_triplets(self.n, &triplets)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| (v - self.get(j, i)).abs() <= tol * (1.0 + v.abs())))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        d
    }

    /// Lower and upper bandwidth.
    pub fn bandwidth(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for i in 0..self.n {
            for (j, _) in self.row(i) {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }
}

/// Imposes `x[dofs[k]] = values[k]` by row/column elimination: known
/// columns move to the right-hand side, constrained rows become identity
/// rows. Symmetry of the remaining block is preserved.
pub fn apply_dirichlet(a: &mut CsrMatrix, rhs: &mut [f64], dofs: &[usize], values: &[f64]) -> Result<()> {
    if dofs.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: dofs.len(), got: values.len() });
    }
    if rhs.len() != a.n {
        return Err(Error::DimensionMismatch { expected: a.n, got: rhs.len() });
    }
    let mut fixed = vec![None; a.n];
    for (&d, &v) in dofs.iter().zip(values) {
        fixed[d] = Some(v);
    }
    for i in 0..a.n {
        let (lo, hi) = (a.row_ptr[i], a.row_ptr[i + 1]);
        if fixed[i].is_some() {
            for k in lo..hi {
                a.values[k] = if a.col_idx[k] == i { 1.0 } else { 0.0 };
            }
            continue;
        }
        for k in lo..hi {
            if let Some(g) = fixed[a.col_idx[k]] {
                rhs[i] -= a.values[k] * g;
                a.values[k] = 0.0;
            }
        }
    }
    for (i, f) in fixed.iter().enumerate() {
        if let Some(g) = f {
            if a.position(i, i).is_none() {
                return Err(Error::InvalidParameter(format!("row {i} has no diagonal entry")));
            }
            rhs[i] = *g;
        }
    }
    Ok(())
}
