use num_complex::Complex64;

use crate::error::{Error, Result};

/// Compressed-sparse-row matrix over `Complex64`.
///
/// Column indices are strictly increasing within each row and duplicate
/// triplet entries are summed on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<Complex64>,
}

impl SparseMatrix {
    /// Builds a matrix from unordered `(row, col, value)` triplets.
    /// Duplicates are summed; exact zeros are kept out of the structure.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, Complex64)],
    ) -> Result<Self> {
        for &(i, j, _) in triplets {
            if i >= n_rows || j >= n_cols {
                return Err(Error::invalid(format!(
                    "triplet ({i}, {j}) outside {n_rows} x {n_cols} matrix"
                )));
            }
        }
        let mut sorted: Vec<&(usize, usize, Complex64)> = triplets.iter().collect();
        sorted.sort_by_key(|t| (t.0, t.1));

        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &&(i, j, v) in &sorted {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(j);
                values.push(v);
                row_offsets[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for r in 0..n_rows {
            row_offsets[r + 1] += row_offsets[r];
        }
        Ok(SparseMatrix {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Diagonal matrix from the given entries.
    pub fn diagonal(diag: &[Complex64]) -> Self {
        let n = diag.len();
        let triplets: Vec<_> = diag
            .iter()
            .enumerate()
            .map(|(i, &v)| (i, i, v))
            .collect();
        Self::from_triplets(n, n, &triplets).expect("diagonal triplets are in range")
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![Complex64::new(1.0, 0.0); n])
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

    /// Iterates stored entries of one row as `(col, value)` pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        self.col_indices[lo..hi]
            .iter()
            .zip(&self.values[lo..hi])
            .map(|(&j, &v)| (j, v))
    }

    /// All stored entries as `(row, col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                got: x.len(),
            });
        }
        let mut y = vec![Complex64::new(0.0, 0.0); self.n_rows];
        for i in 0..self.n_rows {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, v) in self.row(i) {
                acc += v * x[j];
            }
            y[i] = acc;
        }
        Ok(y)
    }

    /// `C = self + scale * other`, merging sparsity patterns.
    pub fn add_scaled(&self, scale: Complex64, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows,
                got: other.n_rows,
            });
        }
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        triplets.extend(self.entries());
        triplets.extend(other.entries().map(|(i, j, v)| (i, j, scale * v)));
        SparseMatrix::from_triplets(self.n_rows, self.n_cols, &triplets)
    }

    /// Maximum `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.entries()
            .map(|(i, j, _)| i.abs_diff(j))
            .max()
            .unwrap_or(0)
    }

    /// Frobenius norm of the stored entries.
    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Main diagonal as a dense vector (zeros where unset).
    pub fn diag(&self) -> Vec<Complex64> {
        let mut d = vec![Complex64::new(0.0, 0.0); self.n_rows.min(self.n_cols)];
        for (i, j, v) in self.entries() {
            if i == j {
                d[i] = v;
            }
        }
        d
    }
}
