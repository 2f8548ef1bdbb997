use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense `|V| x d` node representation together with the optimization step
/// that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix<T> {
    values: Array2<T>,
    step: usize,
}

impl<T: Scalar> EmbeddingMatrix<T> {
    pub fn new(values: Array2<T>) -> Self {
        Self { values, step: 0 }
    }

    pub fn with_step(values: Array2<T>, step: usize) -> Self {
        Self { values, step }
    }

    pub fn zeros(num_nodes: usize, dim: usize) -> Self {
        Self::new(Array2::zeros((num_nodes, dim)))
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn into_values(self) -> Array2<T> {
        self.values
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn num_nodes(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn frobenius(&self) -> T {
        crate::diagnostics::frobenius(&self.values)
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        max_abs_diff(&self.values, &other.values)
    }

    pub(crate) fn expect_rows(&self, rows: usize) -> Result<()> {
        if self.num_nodes() != rows {
            return Err(Error::shape(
                format!("{rows} rows"),
                format!("{} rows", self.num_nodes()),
            ));
        }
        Ok(())
    }
}

pub(crate) fn max_abs_diff<T: Scalar>(a: &Array2<T>, b: &Array2<T>) -> T {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (*x - *y).abs())
        .fold(T::zero(), T::max)
}
