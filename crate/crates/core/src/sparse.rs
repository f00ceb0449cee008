//! Compressed sparse row storage for Jacobians.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from per-row `(column, value)` lists. Columns must be strictly increasing
    /// within a row; explicit zeros are kept so that the pattern depends only on the stencil.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n_rows = rows.len();
        let nnz = rows.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for (r, row) in rows.into_iter().enumerate() {
            let mut last = None;
            for (c, v) in row {
                if c >= n_cols || last.is_some_and(|l| c <= l) {
                    return Err(Error::InvalidArgument(format!(
                        "row {r}: column {c} out of order or out of range"
                    )));
                }
                last = Some(c);
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self { n_rows, n_cols, row_ptr, col_idx, values })
    }

    /// Sums duplicates.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
        for &(r, c, v) in triplets {
            if r >= n_rows {
                return Err(Error::InvalidArgument(format!("row {r} out of range")));
            }
            rows[r].push((c, v));
        }
        for row in &mut rows {
            row.sort_by_key(|&(c, _)| c);
            row.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
        }
        Self::from_rows(n_cols, rows)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_rows(n, (0..n).map(|i| vec![(i, 1.0)]).collect()).expect("identity is well formed")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.row_ptr[r + 1] - self.row_ptr[r]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_rows);
        let mut out = vec![0.0; self.n_cols];
        for (r, &xr) in x.iter().enumerate() {
            for (c, v) in self.row(r) {
                out[c] += v * xr;
            }
        }
        out
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n_rows).map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0; self.n_cols];
        for (c, v) in self.col_idx.iter().zip(&self.values) {
            sums[*c] += v.abs();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let m = SparseMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (0, 0, 2.0), (0, 2, 3.0), (1, 1, -1.0)]).unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 2), 4.0);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]), vec![6.0, -1.0]);
        assert_eq!(m.mul_transpose_vec(&[1.0, 2.0]), vec![2.0, -2.0, 4.0]);
        assert_eq!(m.norm_inf(), 6.0);
        assert_eq!(m.norm_one(), 4.0);
    }

    #[test]
    fn unordered_rows_are_rejected() {
        assert!(SparseMatrix::from_rows(3, vec![vec![(1, 1.0), (0, 1.0)]]).is_err());
        assert!(SparseMatrix::from_rows(3, vec![vec![(3, 1.0)]]).is_err());
    }
}
