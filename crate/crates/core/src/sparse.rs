//! Compressed sparse row storage and the handful of products the models need.
//!
//! Every product walks rows independently and sums each row in storage
//! order, so results do not depend on the number of worker threads.

use ndarray::{Array2, ArrayView2, Axis, Zip};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed; columns inside each row end up sorted.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) outside {rows}x{cols}");
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            indptr[r + 1] += 1;
            indices.push(c);
            data.push(v);
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            rows,
            cols,
            indptr,
            indices,
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![T::one(); n],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    /// Collects the nonzeros of a dense matrix (exact zeros are dropped).
    pub fn from_dense(dense: ArrayView2<'_, T>) -> Self {
        let (rows, cols) = dense.dim();
        let mut triplets = Vec::new();
        for ((r, c), &v) in dense.indexed_iter() {
            if v != T::zero() {
                triplets.push((r, c, v));
            }
        }
        Self::from_triplets(rows, cols, triplets)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn values(&self) -> &[T] {
        &self.data
    }

    /// Stored `(col, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.data[span].iter().copied())
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.indptr[r + 1] - self.indptr[r]
    }

    /// All stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> Option<T> {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .binary_search(&c)
            .ok()
            .map(|k| self.data[span.start + k])
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        self.get(r, c).is_some()
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for (r, c, v) in self.iter() {
            triplets.push((c, r, v));
        }
        Self::from_triplets(self.cols, self.rows, triplets)
    }

    /// New matrix with the same pattern and values `f(row, col, value)`.
    pub fn map_indexed(&self, mut f: impl FnMut(usize, usize, T) -> T) -> Self {
        let mut out = self.clone();
        for r in 0..self.rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                out.data[k] = f(r, self.indices[k], self.data[k]);
            }
        }
        out
    }

    pub fn scale(&self, s: T) -> Self {
        self.map_indexed(|_, _, v| v * s)
    }

    /// `alpha * self + beta * other` on the union of both patterns.
    pub fn linear_combination(&self, alpha: T, other: &Self, beta: T) -> Result<Self> {
        self.check_same_shape(other)?;
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        triplets.extend(self.iter().map(|(r, c, v)| (r, c, alpha * v)));
        triplets.extend(other.iter().map(|(r, c, v)| (r, c, beta * v)));
        Ok(Self::from_triplets(self.rows, self.cols, triplets))
    }

    /// `(self + selfᵀ) / 2`.
    pub fn symmetric_part(&self) -> Result<Self> {
        let half = T::of(0.5);
        self.linear_combination(half, &self.transpose(), half)
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols
            && self.iter().all(|(r, c, v)| {
                let w = self.get(c, r).unwrap_or_else(T::zero);
                (v - w).abs() <= tol
            })
    }

    /// Sparse product `self * other`, dropping entries with `|v| < drop_tol`.
    pub fn matmul(&self, other: &Self, drop_tol: T) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::shape(
                format!("inner dimension {}", self.cols),
                other.rows,
            ));
        }
        let rows: Vec<Vec<(usize, T)>> = (0..self.rows)
            .into_par_iter()
            .map(|r| {
                let mut acc: Vec<T> = vec![T::zero(); other.cols];
                let mut touched: Vec<usize> = Vec::new();
                let mut mark = vec![false; other.cols];
                for (k, a) in self.row(r) {
                    for (c, b) in other.row(k) {
                        if !mark[c] {
                            mark[c] = true;
                            touched.push(c);
                        }
                        acc[c] += a * b;
                    }
                }
                touched.sort_unstable();
                touched
                    .into_iter()
                    .filter(|&c| acc[c] != T::zero() && acc[c].abs() >= drop_tol)
                    .map(|c| (c, acc[c]))
                    .collect()
            })
            .collect();
        let mut indptr = Vec::with_capacity(self.rows + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for row in rows {
            for (c, v) in row {
                indices.push(c);
                data.push(v);
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            rows: self.rows,
            cols: other.cols,
            indptr,
            indices,
            data,
        })
    }

    /// Sparse-dense product `self * x`.
    pub fn mul_dense(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if x.nrows() != self.cols {
            return Err(Error::shape(
                format!("{} rows", self.cols),
                format!("{} rows", x.nrows()),
            ));
        }
        let mut out = Array2::<T>::zeros((self.rows, x.ncols()));
        Zip::indexed(out.axis_iter_mut(Axis(0))).par_for_each(|r, mut out_row| {
            for (c, v) in self.row(r) {
                out_row.scaled_add(v, &x.row(c));
            }
        });
        Ok(out)
    }

    pub fn to_dense(&self) -> Array2<T> {
        let mut out = Array2::<T>::zeros((self.rows, self.cols));
        for (r, c, v) in self.iter() {
            out[[r, c]] += v;
        }
        out
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::shape(
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        Ok(())
    }
}
