//! Real matrices in dense row-major or compressed sparse-row storage.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::vector;

#[derive(Clone, Debug, PartialEq)]
pub enum Storage {
    /// Row-major values, `rows * cols` long.
    Dense(Vec<f64>),
    /// Compressed sparse rows.
    Sparse {
        offsets: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    },
}

/// An immutable `rows x cols` matrix with cached row norms.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    storage: Storage,
    row_norms_sq: Vec<f64>,
    fro_norm_sq: f64,
}

impl Matrix {
    /// Builds a dense matrix from row-major values.
    pub fn from_row_major(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: values.len(),
            });
        }
        Ok(Self::with_storage(rows, cols, Storage::Dense(values)))
    }

    /// Builds a dense matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Self::from_row_major(rows.len(), cols, values)
    }

    pub fn identity(n: usize) -> Self {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
        }
        Self::with_storage(n, n, Storage::Dense(values))
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut values = vec![0.0; n * n];
        for (i, d) in diag.iter().enumerate() {
            values[i * n + i] = *d;
        }
        Self::with_storage(n, n, Storage::Dense(values))
    }

    /// Builds a CSR matrix, validating the structure.
    pub fn from_csr(
        rows: usize,
        cols: usize,
        offsets: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if offsets.len() != rows + 1 {
            return Err(Error::InvalidStructure(format!(
                "expected {} row offsets, got {}",
                rows + 1,
                offsets.len()
            )));
        }
        if offsets[0] != 0 || offsets[rows] != indices.len() || indices.len() != values.len() {
            return Err(Error::InvalidStructure(
                "row offsets do not cover the index/value arrays".into(),
            ));
        }
        for i in 0..rows {
            let (lo, hi) = (offsets[i], offsets[i + 1]);
            if lo > hi {
                return Err(Error::InvalidStructure(format!("row {i}: offsets decrease")));
            }
            let row = &indices[lo..hi];
            if row.iter().any(|&j| j >= cols) {
                return Err(Error::InvalidStructure(format!("row {i}: column index out of range")));
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidStructure(format!(
                    "row {i}: column indices not strictly increasing"
                )));
            }
        }
        Ok(Self::with_storage(
            rows,
            cols,
            Storage::Sparse {
                offsets,
                indices,
                values,
            },
        ))
    }

    /// Builds a CSR matrix from zero-based `(row, col, value)` triplets.
    /// Duplicate coordinates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= rows || j >= cols {
                return Err(Error::InvalidStructure(format!(
                    "entry ({i}, {j}) outside {rows}x{cols}"
                )));
            }
            sorted.push((i, j, v));
        }
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut offsets = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((i, j));
            offsets[i + 1] += 1;
            indices.push(j);
            values.push(v);
        }
        for i in 0..rows {
            offsets[i + 1] += offsets[i];
        }
        Self::from_csr(rows, cols, offsets, indices, values)
    }

    fn with_storage(rows: usize, cols: usize, storage: Storage) -> Self {
        let row_norms_sq: Vec<f64> = match &storage {
            Storage::Dense(_) if cols == 0 => vec![0.0; rows],
            Storage::Dense(v) => v.chunks_exact(cols).map(vector::norm_sq).collect(),
            Storage::Sparse {
                offsets, values, ..
            } => (0..rows)
                .map(|i| vector::norm_sq(&values[offsets[i]..offsets[i + 1]]))
                .collect(),
        };
        let fro_norm_sq = row_norms_sq.iter().sum();
        Self {
            rows,
            cols,
            storage,
            row_norms_sq,
            fro_norm_sq,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse { .. })
    }

    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(v) => v.iter().filter(|x| **x != 0.0).count(),
            Storage::Sparse { values, .. } => values.len(),
        }
    }

    pub fn row_norms_sq(&self) -> &[f64] {
        &self.row_norms_sq
    }

    pub fn fro_norm_sq(&self) -> f64 {
        self.fro_norm_sq
    }

    /// Entry `(i, j)`; a binary search within the row for sparse storage.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense(v) => v[i * self.cols + j],
            Storage::Sparse {
                offsets,
                indices,
                values,
            } => {
                let (lo, hi) = (offsets[i], offsets[i + 1]);
                indices[lo..hi]
                    .binary_search(&j)
                    .map_or(0.0, |pos| values[lo + pos])
            }
        }
    }

    /// `<A_{i,:}, x>`
    #[inline]
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        match &self.storage {
            Storage::Dense(v) => vector::dot(&v[i * self.cols..(i + 1) * self.cols], x),
            Storage::Sparse {
                offsets,
                indices,
                values,
            } => {
                let (lo, hi) = (offsets[i], offsets[i + 1]);
                indices[lo..hi]
                    .iter()
                    .zip(&values[lo..hi])
                    .map(|(&j, v)| v * x[j])
                    .sum()
            }
        }
    }

    /// `y += alpha * A_{i,:}^T`
    #[inline]
    pub fn add_row_scaled(&self, i: usize, alpha: f64, y: &mut [f64]) {
        match &self.storage {
            Storage::Dense(v) => vector::axpy(alpha, &v[i * self.cols..(i + 1) * self.cols], y),
            Storage::Sparse {
                offsets,
                indices,
                values,
            } => {
                let (lo, hi) = (offsets[i], offsets[i + 1]);
                for (&j, v) in indices[lo..hi].iter().zip(&values[lo..hi]) {
                    y[j] += alpha * v;
                }
            }
        }
    }

    fn check_len(expected: usize, found: usize) -> Result<()> {
        if expected != found {
            return Err(Error::DimensionMismatch { expected, found });
        }
        Ok(())
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        Self::check_len(self.cols, x.len())?;
        Ok((0..self.rows).map(|i| self.row_dot(i, x)).collect())
    }

    pub fn matvec_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        Self::check_len(self.rows, y.len())?;
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                self.add_row_scaled(i, yi, &mut out);
            }
        }
        Ok(out)
    }

    /// `A x - b`
    pub fn residual(&self, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        Self::check_len(self.rows, b.len())?;
        let mut r = self.matvec(x)?;
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri -= bi;
        }
        Ok(r)
    }

    /// Row-major dense copy of the values.
    pub fn to_dense_values(&self) -> Vec<f64> {
        match &self.storage {
            Storage::Dense(v) => v.clone(),
            Storage::Sparse {
                offsets,
                indices,
                values,
            } => {
                let mut out = vec![0.0; self.rows * self.cols];
                for i in 0..self.rows {
                    for k in offsets[i]..offsets[i + 1] {
                        out[i * self.cols + indices[k]] = values[k];
                    }
                }
                out
            }
        }
    }

    pub fn to_dense(&self) -> Self {
        Self::with_storage(self.rows, self.cols, Storage::Dense(self.to_dense_values()))
    }

    /// Converts dense storage to CSR, dropping explicit zeros.
    pub fn to_sparse(&self) -> Self {
        let mut triplets = Vec::new();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = self.get(i, j);
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(self.rows, self.cols, &triplets).expect("indices in range")
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.to_dense_values())
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(m[(i, j)]);
            }
        }
        Self::with_storage(rows, cols, Storage::Dense(values))
    }

    /// Gram matrix `A_J A_J^T` of the selected rows, as a dense `|J| x |J|` matrix.
    pub fn row_gram(&self, rows: &[usize]) -> DMatrix<f64> {
        let q = rows.len();
        let mut g = DMatrix::zeros(q, q);
        let mut scratch = vec![0.0; self.cols];
        for (a, &i) in rows.iter().enumerate() {
            scratch.iter_mut().for_each(|v| *v = 0.0);
            self.add_row_scaled(i, 1.0, &mut scratch);
            for (c, &j) in rows.iter().enumerate().skip(a) {
                let v = self.row_dot(j, &scratch);
                g[(a, c)] = v;
                g[(c, a)] = v;
            }
        }
        g
    }
}
