//! Binary cross-entropy objectives in matrix form and their exact full-batch
//! gradients.
//!
//! Every model shares the same loss shape
//!
//! ```text
//! L = -1/2 Σ_ij [ M⁺_ij log σ(s_ij) + λ M⁻_ij log σ(-s_ij) ] + β/2 ‖X‖²
//! ```
//!
//! with `s = X̄ X̄ᵀ` and differs only in the masks `M⁺`, `M⁻` and the
//! propagation `X̄ = P X`:
//!
//! | model    | `M⁺`              | `M⁻`      | `P`                      |
//! |----------|-------------------|-----------|--------------------------|
//! | MF       | `A`               | `B`       | `I`                      |
//! | LINE     | `D⁻¹A`            | `B`       | `I`                      |
//! | DeepWalk | `P_{1,w}(D⁻¹A)`   | `D_B⁻¹B`  | `I`                      |
//! | LightGCN | `A`               | `B`       | `P_{0,K}(D^-½ A D^-½)`   |
//!
//! Scores are only evaluated on the mask supports; the dense Gram matrix is
//! never formed.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::graph::{normalize, Graph, NormScheme, ProximityOperator, DEFAULT_MAX_ORDER};
use crate::negative::{normalize_negatives, NegativeSet};
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

/// Entries of materialized random-walk proximities below this are dropped.
pub const DEFAULT_DROP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Model {
    Mf,
    Line,
    #[serde(rename = "deepwalk")]
    DeepWalk { window: usize },
    #[serde(rename = "lightgcn")]
    LightGcn { layers: usize },
}

impl Model {
    pub const DEFAULT_WINDOW: usize = 5;
    pub const DEFAULT_LAYERS: usize = 3;

    pub fn name(&self) -> &'static str {
        match self {
            Model::Mf => "mf",
            Model::Line => "line",
            Model::DeepWalk { .. } => "deepwalk",
            Model::LightGcn { .. } => "lightgcn",
        }
    }

    /// Whether scoring uses the propagated representation `X̄`.
    pub fn propagates(&self) -> bool {
        matches!(self, Model::LightGcn { .. })
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::DeepWalk { window } => write!(f, "deepwalk:{window}"),
            Model::LightGcn { layers } => write!(f, "lightgcn:{layers}"),
            m => f.write_str(m.name()),
        }
    }
}

/// Accepts `mf`, `line`, `deepwalk[:w]` and `lightgcn[:K]`.
impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (name, arg) = match lower.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (lower.as_str(), None),
        };
        let arg = |default: usize| -> Result<usize> {
            arg.map_or(Ok(default), |a| {
                a.parse()
                    .map_err(|_| Error::UnknownModel(s.to_string()))
            })
        };
        match name {
            "mf" if arg(0)? == 0 => Ok(Model::Mf),
            "line" if arg(0)? == 0 => Ok(Model::Line),
            "deepwalk" | "dw" => {
                let window = arg(Model::DEFAULT_WINDOW)?;
                if window == 0 {
                    return Err(Error::InvalidConfig("DeepWalk window must be >= 1".into()));
                }
                Ok(Model::DeepWalk { window })
            }
            "lightgcn" | "lgc" => Ok(Model::LightGcn {
                layers: arg(Model::DEFAULT_LAYERS)?,
            }),
            _ => Err(Error::UnknownModel(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParams<T> {
    pub lambda: T,
    pub beta: T,
    pub model: Model,
}

impl<T: Scalar> LossParams<T> {
    pub fn new(model: Model, lambda: T, beta: T) -> Self {
        Self {
            lambda,
            beta,
            model,
        }
    }
}

/// Masks and propagation of one model on one `(graph, negatives)` pair,
/// built once and reused across steps.
#[derive(Debug, Clone)]
pub struct Objective<T> {
    params: LossParams<T>,
    pos_mask: CsrMatrix<T>,
    neg_mask: CsrMatrix<T>,
    propagation: ProximityOperator<T>,
}

impl<T: Scalar> Objective<T> {
    pub fn new(graph: &Graph, negatives: &NegativeSet, params: LossParams<T>) -> Result<Self> {
        Self::with_drop_tol(graph, negatives, params, T::of(DEFAULT_DROP_TOL))
    }

    pub fn with_drop_tol(
        graph: &Graph,
        negatives: &NegativeSet,
        params: LossParams<T>,
        drop_tol: T,
    ) -> Result<Self> {
        if negatives.num_nodes() != graph.num_nodes() {
            return Err(Error::shape(graph.num_nodes(), negatives.num_nodes()));
        }
        if params.lambda < T::zero() || params.beta < T::zero() {
            return Err(Error::InvalidConfig("lambda and beta must be >= 0".into()));
        }
        let n = graph.num_nodes();
        let (pos_mask, neg_mask, propagation) = match params.model {
            Model::Mf => (
                graph.adjacency(),
                negatives.adjacency(),
                ProximityOperator::identity(n),
            ),
            Model::Line => (
                normalize(graph, NormScheme::Row).matrix().clone(),
                negatives.adjacency(),
                ProximityOperator::identity(n),
            ),
            Model::DeepWalk { window } => {
                if window == 0 {
                    return Err(Error::InvalidConfig("DeepWalk window must be >= 1".into()));
                }
                let walk = normalize(graph, NormScheme::Row);
                let p = ProximityOperator::new(&walk, 1, window, DEFAULT_MAX_ORDER)?;
                (
                    p.materialize(drop_tol)?,
                    normalize_negatives(negatives, NormScheme::Row).matrix().clone(),
                    ProximityOperator::identity(n),
                )
            }
            Model::LightGcn { layers } => {
                let sym = normalize(graph, NormScheme::Symmetric);
                (
                    graph.adjacency(),
                    negatives.adjacency(),
                    ProximityOperator::new(&sym, 0, layers, DEFAULT_MAX_ORDER)?,
                )
            }
        };
        Ok(Self {
            params,
            pos_mask,
            neg_mask,
            propagation,
        })
    }

    pub fn params(&self) -> &LossParams<T> {
        &self.params
    }

    pub fn pos_mask(&self) -> &CsrMatrix<T> {
        &self.pos_mask
    }

    pub fn neg_mask(&self) -> &CsrMatrix<T> {
        &self.neg_mask
    }

    pub fn propagation(&self) -> &ProximityOperator<T> {
        &self.propagation
    }

    /// The representation used for similarities: `X̄ = P X`.
    pub fn representation(&self, x: &Array2<T>) -> Result<Array2<T>> {
        self.propagation.apply(x.view())
    }

    pub fn loss(&self, x: &EmbeddingMatrix<T>) -> Result<T> {
        x.expect_rows(self.pos_mask.rows())?;
        let xbar = self.representation(x.values())?;
        let data = masked_log_likelihood(&xbar, &self.pos_mask, &self.neg_mask, self.params.lambda);
        Ok(-T::of(0.5) * data + T::of(0.5) * self.params.beta * squared_norm(x.values()))
    }

    /// `∂L/∂X = β X - Pᵀ · sym(S_A ⊙ M⁺ - λ S_B ⊙ M⁻) · P X`.
    pub fn gradient(&self, x: &EmbeddingMatrix<T>) -> Result<Array2<T>> {
        x.expect_rows(self.pos_mask.rows())?;
        let xbar = self.representation(x.values())?;
        let coeffs = residual_coefficients(&xbar, &self.pos_mask, &self.neg_mask, self.params.lambda);
        // ∂L/∂s_ij = -C_ij / 2 and s = X̄X̄ᵀ, so ∂L/∂X̄ = -(C + Cᵀ) X̄ / 2.
        let mut d_xbar = coeffs.mul_dense(xbar.view())?;
        d_xbar += &coeffs.transpose().mul_dense(xbar.view())?;
        d_xbar *= -T::of(0.5);
        let mut grad = self.propagation.apply_transpose(d_xbar.view())?;
        grad.scaled_add(self.params.beta, x.values());
        Ok(grad)
    }
}

fn dot<T: Scalar>(a: ArrayView1<'_, T>, b: ArrayView1<'_, T>) -> T {
    a.iter().zip(b.iter()).map(|(x, y)| *x * *y).sum()
}

fn squared_norm<T: Scalar>(x: &Array2<T>) -> T {
    x.iter().map(|v| *v * *v).sum()
}

/// `Σ_ij M⁺_ij log σ(s_ij) + λ M⁻_ij log σ(-s_ij)` over the mask supports.
fn masked_log_likelihood<T: Scalar>(
    xbar: &Array2<T>,
    pos: &CsrMatrix<T>,
    neg: &CsrMatrix<T>,
    lambda: T,
) -> T {
    let per_row: Vec<T> = (0..pos.rows())
        .into_par_iter()
        .map(|i| {
            let xi = xbar.row(i);
            let mut acc = T::zero();
            for (j, m) in pos.row(i) {
                acc += m * dot(xi, xbar.row(j)).log_sigmoid();
            }
            for (j, m) in neg.row(i) {
                acc += lambda * m * (-dot(xi, xbar.row(j))).log_sigmoid();
            }
            acc
        })
        .collect();
    per_row.into_iter().sum()
}

/// `C = (1 - σ(s)) ⊙ M⁺ - λ σ(s) ⊙ M⁻` on the union of the supports.
fn residual_coefficients<T: Scalar>(
    xbar: &Array2<T>,
    pos: &CsrMatrix<T>,
    neg: &CsrMatrix<T>,
    lambda: T,
) -> CsrMatrix<T> {
    let rows: Vec<Vec<(usize, usize, T)>> = (0..pos.rows())
        .into_par_iter()
        .map(|i| {
            let xi = xbar.row(i);
            let mut out = Vec::with_capacity(pos.row_nnz(i) + neg.row_nnz(i));
            for (j, m) in pos.row(i) {
                let sig = dot(xi, xbar.row(j)).sigmoid();
                out.push((i, j, m * (T::one() - sig)));
            }
            for (j, m) in neg.row(i) {
                let sig = dot(xi, xbar.row(j)).sigmoid();
                out.push((i, j, -lambda * m * sig));
            }
            out
        })
        .collect();
    CsrMatrix::from_triplets(pos.rows(), pos.cols(), rows.into_iter().flatten().collect())
}

/// Plain BCE with `s = X Xᵀ` and arbitrary nonnegative masks.
pub fn bce_loss<T: Scalar>(
    x: &Array2<T>,
    pos_mask: &CsrMatrix<T>,
    neg_mask: &CsrMatrix<T>,
    lambda: T,
    beta: T,
) -> Result<T> {
    let n = x.nrows();
    for m in [pos_mask, neg_mask] {
        if m.rows() != n || m.cols() != n {
            return Err(Error::shape(
                format!("{n}x{n} mask"),
                format!("{}x{}", m.rows(), m.cols()),
            ));
        }
    }
    let data = masked_log_likelihood(x, pos_mask, neg_mask, lambda);
    Ok(-T::of(0.5) * data + T::of(0.5) * beta * squared_norm(x))
}

pub fn model_loss<T: Scalar>(
    x: &EmbeddingMatrix<T>,
    graph: &Graph,
    negatives: &NegativeSet,
    params: LossParams<T>,
) -> Result<T> {
    Objective::new(graph, negatives, params)?.loss(x)
}

pub fn loss_gradient<T: Scalar>(
    x: &EmbeddingMatrix<T>,
    graph: &Graph,
    negatives: &NegativeSet,
    params: LossParams<T>,
) -> Result<Array2<T>> {
    Objective::new(graph, negatives, params)?.gradient(x)
}

/// `X - α ∇L`, with the step index advanced.
pub fn gd_step<T: Scalar>(
    x: &EmbeddingMatrix<T>,
    gradient: &Array2<T>,
    alpha: T,
) -> Result<EmbeddingMatrix<T>> {
    if !(alpha >= T::zero()) {
        return Err(Error::InvalidConfig(format!("learning rate {alpha} must be >= 0")));
    }
    if gradient.dim() != x.values().dim() {
        return Err(Error::shape(
            format!("{:?}", x.values().dim()),
            format!("{:?}", gradient.dim()),
        ));
    }
    let mut next = x.values().clone();
    next.scaled_add(-alpha, gradient);
    let next = EmbeddingMatrix::with_step(next, x.step() + 1);
    if !next.is_finite() {
        return Err(Error::Divergence { step: next.step() });
    }
    Ok(next)
}
