//! Link prediction on undirected (typically bipartite user/item) graphs.
//!
//! Four embedding models are covered: matrix factorization, LINE, DeepWalk in
//! its matrix form, and LightGCN. Each can be trained two ways:
//!
//! * by full-batch gradient descent on a binary cross-entropy objective
//!   ([`objectives`]), or
//! * by repeatedly applying a propagation kernel `X <- H X` that only uses
//!   forward products ([`kernel`]).
//!
//! The two routes are algebraically identical; [`trainer::compare_paths`]
//! measures how closely they agree numerically.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`). The
//! aliases at the crate root fix the scalar to `f64`, which is what the CLI
//! and the reports use.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod kernel;
pub mod negative;
pub mod objectives;
pub mod oracle;
pub mod scalar;
pub mod sparse;
pub mod synth;
pub mod trainer;

pub use embedding::EmbeddingMatrix;
pub use error::{Error, Result};
pub use graph::{Graph, NormScheme, Partition};
pub use kernel::KernelConfig;
pub use negative::{NegativeSet, SamplingStrategy};
pub use objectives::Model;
pub use scalar::Scalar;
pub use trainer::{TrainConfig, TrainPath};

/// Dense embedding matrix in double precision.
pub type Embedding = EmbeddingMatrix<f64>;
/// Dense embedding matrix in single precision.
pub type Embedding32 = EmbeddingMatrix<f32>;
/// Compressed sparse row matrix in double precision.
pub type Csr = sparse::CsrMatrix<f64>;
/// Normalized adjacency in double precision.
pub type NormalizedAdjacency = graph::NormalizedAdjacency<f64>;
/// High-order proximity operator in double precision.
pub type ProximityOperator = graph::ProximityOperator<f64>;
/// Propagation-kernel engine in double precision.
pub type KernelEngine = kernel::KernelEngine<f64>;
/// Objective (loss + gradient) in double precision.
pub type Objective = objectives::Objective<f64>;
