//! Forward-only training: one optimization step as `X <- H X` with
//!
//! ```text
//! H = c1 I + c2 Pᵀ sym(K₊ - λ K₋) P,          P  = P_{a1,b1}(Ã)
//! K₊ = S_A ⊙ (c3 P_{a2,b2}(Ã) + (1 - c3) A)
//! K₋ = S_B ⊙ (c3 B̃ + (1 - c3) B)
//! S_B = σ(X̄ X̄ᵀ), S_A = 1 - S_B,             X̄ = P X
//! ```
//!
//! `sym(M) = (M + Mᵀ)/2` only matters when a mask is row-normalized; for the
//! symmetric masks of MF and LightGCN it is the identity. `H` is never
//! formed in [`KernelEngine::step`]; it is applied as a chain of sparse
//! products. [`KernelEngine::materialize`] builds it densely for inspection.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::graph::{Graph, NormScheme, NormalizedAdjacency, ProximityOperator, DEFAULT_MAX_ORDER};
use crate::negative::{normalize_negatives, NegativeSet};
use crate::objectives::{Model, DEFAULT_DROP_TOL};
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

/// Largest node count for which `H` may be materialized densely.
pub const DEFAULT_DENSE_LIMIT: usize = 500;

/// Constants of one propagation kernel. Field names are the on-disk keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub a1: usize,
    pub b1: usize,
    pub a2: usize,
    pub b2: usize,
    pub pos_norm: NormScheme,
    pub neg_norm: NormScheme,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<Model>,
}

/// Replacement normalizations for [`model_config`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NormOverrides {
    pub pos: Option<NormScheme>,
    pub neg: Option<NormScheme>,
}

/// The kernel constants that make one kernel step coincide with one
/// gradient-descent step of `model` at learning rate `alpha`.
pub fn model_config(
    model: Model,
    alpha: f64,
    beta: f64,
    lambda: f64,
    overrides: NormOverrides,
) -> Result<KernelConfig> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidConfig(format!("learning rate {alpha}")));
    }
    let base = KernelConfig {
        c1: 1.0 - alpha * beta,
        c2: alpha,
        c3: 0.0,
        a1: 0,
        b1: 0,
        a2: 0,
        b2: 0,
        pos_norm: NormScheme::None,
        neg_norm: NormScheme::None,
        lambda,
        model: Some(model),
    };
    let mut cfg = match model {
        Model::Mf => base,
        // B is already drawn from the degree^{3/4} noise distribution, so it
        // enters the kernel unnormalized.
        Model::Line => KernelConfig {
            c3: 1.0,
            a2: 1,
            b2: 1,
            pos_norm: NormScheme::Row,
            ..base
        },
        Model::DeepWalk { window } => KernelConfig {
            c3: 1.0,
            a2: 1,
            b2: window,
            pos_norm: NormScheme::Row,
            neg_norm: NormScheme::Row,
            ..base
        },
        Model::LightGcn { layers } => KernelConfig {
            b1: layers,
            pos_norm: NormScheme::Symmetric,
            ..base
        },
    };
    if let Some(p) = overrides.pos {
        cfg.pos_norm = p;
    }
    if let Some(n) = overrides.neg {
        cfg.neg_norm = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.a1 > self.b1 {
            return Err(Error::InvalidOrder { a: self.a1, b: self.b1 });
        }
        if self.a2 > self.b2 {
            return Err(Error::InvalidOrder { a: self.a2, b: self.b2 });
        }
        if self.c3 != 0.0 && self.c3 != 1.0 {
            return Err(Error::InvalidConfig(format!("c3 must be 0 or 1, got {}", self.c3)));
        }
        for (name, v) in [("c1", self.c1), ("c2", self.c2), ("lambda", self.lambda)] {
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} is not finite")));
            }
        }
        Ok(())
    }

    /// Whether `P_{a1,b1}` is the identity.
    pub fn is_unpropagated(&self) -> bool {
        self.b1 == 0
    }
}

/// `S_A = 1 - σ(X̄X̄ᵀ)` and `S_B = σ(X̄X̄ᵀ)` on a sparse support.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorePair<T> {
    pub s_a: CsrMatrix<T>,
    pub s_b: CsrMatrix<T>,
}

impl<T: Scalar> ScorePair<T> {
    pub fn from_parts(s_a: CsrMatrix<T>, s_b: CsrMatrix<T>) -> Result<Self> {
        if s_a.rows() != s_b.rows() || s_a.cols() != s_b.cols() {
            return Err(Error::shape(
                format!("{}x{}", s_a.rows(), s_a.cols()),
                format!("{}x{}", s_b.rows(), s_b.cols()),
            ));
        }
        Ok(Self { s_a, s_b })
    }
}

/// Scores at every stored position of `support`.
pub fn score_matrices<T: Scalar>(xbar: &Array2<T>, support: &CsrMatrix<T>) -> Result<ScorePair<T>> {
    if support.rows() != xbar.nrows() {
        return Err(Error::shape(xbar.nrows(), support.rows()));
    }
    let s_b = support.map_indexed(|i, j, _| {
        xbar.row(i)
            .iter()
            .zip(xbar.row(j).iter())
            .map(|(a, b)| *a * *b)
            .sum::<T>()
            .sigmoid()
    });
    let s_a = s_b.map_indexed(|_, _, s| T::one() - s);
    Ok(ScorePair { s_a, s_b })
}

/// Dense `(S_A, S_B)` over all `|V|²` pairs.
pub fn dense_score_matrices<T: Scalar>(xbar: &Array2<T>) -> (Array2<T>, Array2<T>) {
    let s_b = xbar.dot(&xbar.t()).mapv(|s| s.sigmoid());
    let s_a = s_b.mapv(|s| T::one() - s);
    (s_a, s_b)
}

/// `K₊` on the positive mask support and `K₋` on the negative one.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkKernels<T> {
    pub k_plus: CsrMatrix<T>,
    pub k_minus: CsrMatrix<T>,
}

/// Norm of the iterate after each of the four parts of a kernel step:
/// (1) `P X`, (2) the link-kernel product, (3) `Pᵀ`, (4) the `c1, c2`
/// combination.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstepTrace {
    pub input_norm: f64,
    pub entries: Vec<(u8, f64)>,
}

#[derive(Debug, Clone)]
pub struct KernelStep<T> {
    pub x: EmbeddingMatrix<T>,
    pub kernels: LinkKernels<T>,
    pub trace: Option<SubstepTrace>,
}

/// Precomputed masks and propagation for one `(config, graph, negatives)`.
#[derive(Debug, Clone)]
pub struct KernelEngine<T> {
    config: KernelConfig,
    c1: T,
    c2: T,
    lambda: T,
    propagation: ProximityOperator<T>,
    pos_mask: CsrMatrix<T>,
    neg_mask: CsrMatrix<T>,
    support: CsrMatrix<T>,
}

impl<T: Scalar> KernelEngine<T> {
    pub fn new(config: &KernelConfig, graph: &Graph, negatives: &NegativeSet) -> Result<Self> {
        Self::with_drop_tol(config, graph, negatives, T::of(DEFAULT_DROP_TOL))
    }

    pub fn with_drop_tol(
        config: &KernelConfig,
        graph: &Graph,
        negatives: &NegativeSet,
        drop_tol: T,
    ) -> Result<Self> {
        config.validate()?;
        if negatives.num_nodes() != graph.num_nodes() {
            return Err(Error::shape(graph.num_nodes(), negatives.num_nodes()));
        }
        let a = graph.adjacency::<T>();
        let a_tilde = NormalizedAdjacency::from_matrix(&a, config.pos_norm);
        let propagation = ProximityOperator::new(&a_tilde, config.a1, config.b1, DEFAULT_MAX_ORDER)?;
        let (pos_mask, neg_mask) = if config.c3 == 1.0 {
            let hop = ProximityOperator::new(&a_tilde, config.a2, config.b2, DEFAULT_MAX_ORDER)?;
            (
                hop.materialize(drop_tol)?,
                normalize_negatives(negatives, config.neg_norm).matrix().clone(),
            )
        } else {
            (a, negatives.adjacency())
        };
        let support = pos_mask
            .linear_combination(T::one(), &neg_mask, T::one())?
            .map_indexed(|_, _, _| T::one());
        Ok(Self {
            c1: T::of(config.c1),
            c2: T::of(config.c2),
            lambda: T::of(config.lambda),
            config: config.clone(),
            propagation,
            pos_mask,
            neg_mask,
            support,
        })
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
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

    pub fn num_nodes(&self) -> usize {
        self.pos_mask.rows()
    }

    /// `X̄ = P_{a1,b1}(Ã) X`.
    pub fn representation(&self, x: &Array2<T>) -> Result<Array2<T>> {
        self.propagation.apply(x.view())
    }

    /// Scores on the union of the positive and negative mask supports.
    pub fn scores(&self, x: &EmbeddingMatrix<T>) -> Result<ScorePair<T>> {
        x.expect_rows(self.num_nodes())?;
        score_matrices(&self.representation(x.values())?, &self.support)
    }

    pub fn link_kernels(&self, scores: &ScorePair<T>) -> Result<LinkKernels<T>> {
        let mask = |mask: &CsrMatrix<T>, s: &CsrMatrix<T>| -> Result<CsrMatrix<T>> {
            let mut missing = None;
            let out = mask.map_indexed(|i, j, m| match s.get(i, j) {
                Some(v) => v * m,
                None => {
                    missing.get_or_insert((i, j));
                    T::zero()
                }
            });
            match missing {
                Some((row, col)) => Err(Error::SupportMismatch { row, col }),
                None => Ok(out),
            }
        };
        Ok(LinkKernels {
            k_plus: mask(&self.pos_mask, &scores.s_a)?,
            k_minus: mask(&self.neg_mask, &scores.s_b)?,
        })
    }

    /// One kernel step from the current iterate.
    pub fn step(&self, x: &EmbeddingMatrix<T>, trace: bool) -> Result<KernelStep<T>> {
        let kernels = self.link_kernels(&self.scores(x)?)?;
        self.apply_kernels(x, kernels, trace)
    }

    /// `c1 X + c2 Pᵀ sym(K₊ - λK₋) P X` for externally supplied kernels.
    pub fn apply_kernels(
        &self,
        x: &EmbeddingMatrix<T>,
        kernels: LinkKernels<T>,
        trace: bool,
    ) -> Result<KernelStep<T>> {
        x.expect_rows(self.num_nodes())?;
        let norm = |m: &Array2<T>| crate::diagnostics::frobenius(m).to_f64_lossy();
        let mut entries = Vec::with_capacity(if trace { 4 } else { 0 });

        let xbar = self.propagation.apply(x.values().view())?;
        if trace {
            entries.push((1, norm(&xbar)));
        }

        let signed = kernels
            .k_plus
            .linear_combination(T::one(), &kernels.k_minus, -self.lambda)?;
        let mut mixed = signed.mul_dense(xbar.view())?;
        mixed += &signed.transpose().mul_dense(xbar.view())?;
        mixed *= T::of(0.5);
        if trace {
            entries.push((2, norm(&mixed)));
        }

        let back = self.propagation.apply_transpose(mixed.view())?;
        if trace {
            entries.push((3, norm(&back)));
        }

        let mut next = x.values() * self.c1;
        next.scaled_add(self.c2, &back);
        if trace {
            entries.push((4, norm(&next)));
        }

        let next = EmbeddingMatrix::with_step(next, x.step() + 1);
        if !next.is_finite() {
            return Err(Error::Divergence { step: next.step() });
        }
        Ok(KernelStep {
            x: next,
            kernels,
            trace: trace.then(|| SubstepTrace {
                input_norm: norm(x.values()),
                entries,
            }),
        })
    }

    /// Dense `H` for the given scores.
    pub fn materialize(&self, scores: &ScorePair<T>, dense_limit: usize) -> Result<Array2<T>> {
        let n = self.num_nodes();
        if n > dense_limit {
            return Err(Error::DenseLimit {
                nodes: n,
                limit: dense_limit,
            });
        }
        let kernels = self.link_kernels(scores)?;
        let signed = kernels
            .k_plus
            .linear_combination(T::one(), &kernels.k_minus, -self.lambda)?
            .symmetric_part()?
            .to_dense();
        let p = self.propagation.to_dense()?;
        let mut h = p.t().dot(&signed).dot(&p) * self.c2;
        for i in 0..n {
            h[[i, i]] += self.c1;
        }
        Ok(h)
    }
}

pub fn link_kernels<T: Scalar>(
    scores: &ScorePair<T>,
    graph: &Graph,
    negatives: &NegativeSet,
    config: &KernelConfig,
) -> Result<LinkKernels<T>> {
    KernelEngine::new(config, graph, negatives)?.link_kernels(scores)
}

pub fn kernel_step<T: Scalar>(
    x: &EmbeddingMatrix<T>,
    config: &KernelConfig,
    graph: &Graph,
    negatives: &NegativeSet,
) -> Result<EmbeddingMatrix<T>> {
    Ok(KernelEngine::new(config, graph, negatives)?.step(x, false)?.x)
}

pub fn materialize_kernel<T: Scalar>(
    config: &KernelConfig,
    x: &EmbeddingMatrix<T>,
    graph: &Graph,
    negatives: &NegativeSet,
) -> Result<Array2<T>> {
    let engine = KernelEngine::new(config, graph, negatives)?;
    engine.materialize(&engine.scores(x)?, DEFAULT_DENSE_LIMIT)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignReport {
    pub positive_checked: usize,
    pub negative_checked: usize,
    /// Smallest off-diagonal entry of `H - c1 I` at a positive link.
    pub min_positive: f64,
    /// Largest off-diagonal entry of `H - c1 I` at a negative link.
    pub max_negative: f64,
}

/// Checks that positive links pull together (`H_ij ≥ 0`) and sampled
/// negative links push apart (`H_ij ≤ 0`). Requires an unpropagated kernel
/// so each entry of `H` belongs to exactly one link.
pub fn sign_structure<T: Scalar>(
    h: &Array2<T>,
    graph: &Graph,
    negatives: &NegativeSet,
    config: &KernelConfig,
) -> Result<SignReport> {
    if !config.is_unpropagated() {
        return Err(Error::InvalidConfig(
            "sign structure needs a kernel without outer propagation (b1 = 0)".into(),
        ));
    }
    let n = graph.num_nodes();
    if h.dim() != (n, n) {
        return Err(Error::shape(format!("{n}x{n}"), format!("{:?}", h.dim())));
    }
    let mut violations = Vec::new();
    let mut report = SignReport {
        positive_checked: 0,
        negative_checked: 0,
        min_positive: f64::INFINITY,
        max_negative: f64::NEG_INFINITY,
    };
    for &(u, v) in graph.edges() {
        for (i, j) in [(u, v), (v, u)] {
            let value = h[[i, j]].to_f64_lossy();
            report.positive_checked += 1;
            report.min_positive = report.min_positive.min(value);
            if value < 0.0 {
                violations.push((i, j, value));
            }
        }
    }
    for &(u, v) in negatives.pairs() {
        for (i, j) in [(u, v), (v, u)] {
            let value = h[[i, j]].to_f64_lossy();
            report.negative_checked += 1;
            report.max_negative = report.max_negative.max(value);
            if value > 0.0 {
                violations.push((i, j, value));
            }
        }
    }
    if violations.is_empty() {
        Ok(report)
    } else {
        Err(Error::SignViolation { violations })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toy() -> (Graph, NegativeSet) {
        let g = Graph::new(4, [(0, 1), (1, 2)], None).unwrap();
        let neg = NegativeSet::from_pairs(&g, [(0, 3), (2, 3)]).unwrap();
        (g, neg)
    }

    #[test]
    fn table_rows() {
        let mf = model_config(Model::Mf, 0.1, 0.01, 1.0, NormOverrides::default()).unwrap();
        assert!((mf.c1 - 0.999).abs() < 1e-15);
        assert_eq!(mf.c2, 0.1);
        assert_eq!(mf.c3, 0.0);
        assert_eq!((mf.a1, mf.b1, mf.a2, mf.b2), (0, 0, 0, 0));

        let lgc = model_config(Model::LightGcn { layers: 3 }, 0.1, 0.0, 1.0, NormOverrides::default()).unwrap();
        assert_eq!((lgc.a1, lgc.b1, lgc.c3), (0, 3, 0.0));
        assert_eq!(lgc.pos_norm, NormScheme::Symmetric);

        let dw = model_config(Model::DeepWalk { window: 5 }, 0.1, 0.0, 1.0, NormOverrides::default()).unwrap();
        assert_eq!((dw.a2, dw.b2, dw.c3), (1, 5, 1.0));
        assert_eq!((dw.pos_norm, dw.neg_norm), (NormScheme::Row, NormScheme::Row));

        let line = model_config(Model::Line, 0.1, 0.0, 1.0, NormOverrides::default()).unwrap();
        assert_eq!((line.a2, line.b2, line.c3, line.b1), (1, 1, 1.0, 0));
        assert_eq!(line.pos_norm, NormScheme::Row);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = model_config(Model::Mf, 0.1, 0.0, 1.0, NormOverrides::default()).unwrap();
        cfg.c3 = 0.5;
        assert!(cfg.validate().is_err());
        cfg.c3 = 0.0;
        cfg.a1 = 2;
        assert!(matches!(cfg.validate(), Err(Error::InvalidOrder { .. })));
        assert!(model_config(Model::Mf, f64::NAN, 0.0, 1.0, NormOverrides::default()).is_err());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = model_config(Model::DeepWalk { window: 3 }, 0.01, 0.1, 1.0, NormOverrides::default()).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        for key in ["c1", "c2", "c3", "a1", "b1", "a2", "b2", "pos_norm", "neg_norm", "lambda"] {
            assert!(text.contains(&format!("{key} = ")), "{key} missing in\n{text}");
        }
        let back: KernelConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn zero_embedding_scores_are_half() {
        let xbar = Array2::<f64>::zeros((4, 2));
        let (g, neg) = toy();
        let support = g.adjacency().linear_combination(1.0, &neg.adjacency(), 1.0).unwrap();
        let s = score_matrices(&xbar, &support).unwrap();
        assert!(s.s_a.values().iter().chain(s.s_b.values()).all(|&v| v == 0.5));
    }

    #[test]
    fn large_similarity_drives_positive_score_to_zero() {
        let xbar = array![[10.0], [10.0]];
        let support = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 1.0)]);
        let s = score_matrices(&xbar, &support).unwrap();
        assert!(s.s_a.get(0, 1).unwrap() < 1e-40);
    }

    #[test]
    fn mf_kernel_is_scores_times_adjacency() {
        let (g, neg) = toy();
        let cfg = model_config(Model::Mf, 0.1, 0.0, 1.0, NormOverrides::default()).unwrap();
        let engine = KernelEngine::<f64>::new(&cfg, &g, &neg).unwrap();
        let x = EmbeddingMatrix::new(array![[0.1, 0.2], [0.3, -0.1], [0.0, 0.5], [-0.2, 0.2]]);
        let scores = engine.scores(&x).unwrap();
        let k = engine.link_kernels(&scores).unwrap();
        for (i, j, v) in k.k_plus.iter() {
            assert!(g.has_edge(i, j));
            assert_eq!(v, scores.s_a.get(i, j).unwrap());
        }
        assert_eq!(k.k_plus.nnz(), 2 * g.num_edges());
    }

    #[test]
    fn origin_is_fixed_and_zero_c2_shrinks() {
        let (g, neg) = toy();
        for model in [Model::Mf, Model::Line, Model::DeepWalk { window: 2 }, Model::LightGcn { layers: 2 }] {
            let cfg = model_config(model, 0.1, 0.2, 1.0, NormOverrides::default()).unwrap();
            let zero = EmbeddingMatrix::<f64>::zeros(4, 3);
            assert!(kernel_step(&zero, &cfg, &g, &neg).unwrap().values().iter().all(|&v| v == 0.0));

            let shrink = KernelConfig { c2: 0.0, ..cfg.clone() };
            let x = EmbeddingMatrix::new(Array2::from_elem((4, 3), 0.3));
            let out = kernel_step(&x, &shrink, &g, &neg).unwrap();
            assert_eq!(out.values(), &(x.values() * cfg.c1));
        }
    }

    #[test]
    fn mf_kernel_at_origin_is_half_signed_adjacency() {
        let (g, neg) = toy();
        let (alpha, beta, lambda) = (0.1, 0.5, 1.0);
        let cfg = model_config(Model::Mf, alpha, beta, lambda, NormOverrides::default()).unwrap();
        let h = materialize_kernel(&cfg, &EmbeddingMatrix::<f64>::zeros(4, 2), &g, &neg).unwrap();
        let a = g.adjacency::<f64>().to_dense();
        let b = neg.adjacency::<f64>().to_dense();
        let mut expected = (&a - &(&b * lambda)) * (alpha / 2.0);
        for i in 0..4 {
            expected[[i, i]] += 1.0 - alpha * beta;
        }
        assert!(crate::embedding::max_abs_diff(&h, &expected) < 1e-15);
    }

    #[test]
    fn isolated_node_row_is_shrinkage_only() {
        let g = Graph::new(4, [(0, 1), (1, 2)], None).unwrap();
        let neg = NegativeSet::from_pairs(&g, [(0, 2)]).unwrap();
        let cfg = model_config(Model::LightGcn { layers: 2 }, 0.1, 0.3, 1.0, NormOverrides::default()).unwrap();
        let x = EmbeddingMatrix::new(Array2::from_elem((4, 2), 0.2));
        let h = materialize_kernel(&cfg, &x, &g, &neg).unwrap();
        for j in 0..4 {
            let expected = if j == 3 { cfg.c1 } else { 0.0 };
            assert_eq!(h[[3, j]], expected);
        }
    }

    #[test]
    fn dense_limit_enforced() {
        let (g, neg) = toy();
        let cfg = model_config(Model::Mf, 0.1, 0.0, 1.0, NormOverrides::default()).unwrap();
        let engine = KernelEngine::<f64>::new(&cfg, &g, &neg).unwrap();
        let scores = engine.scores(&EmbeddingMatrix::zeros(4, 2)).unwrap();
        assert!(matches!(engine.materialize(&scores, 3), Err(Error::DenseLimit { nodes: 4, limit: 3 })));
    }

    #[test]
    fn support_mismatch_detected() {
        let (g, neg) = toy();
        let cfg = model_config(Model::Mf, 0.1, 0.0, 1.0, NormOverrides::default()).unwrap();
        let engine = KernelEngine::<f64>::new(&cfg, &g, &neg).unwrap();
        let partial = CsrMatrix::from_triplets(4, 4, vec![(0, 1, 0.5)]);
        let scores = ScorePair::from_parts(partial.clone(), partial).unwrap();
        assert!(matches!(engine.link_kernels(&scores), Err(Error::SupportMismatch { .. })));
    }

    #[test]
    fn perfect_reconstruction_is_a_fixed_point() {
        let (g, neg) = toy();
        let cfg = model_config(Model::Mf, 0.1, 0.0, 1.0, NormOverrides::default()).unwrap();
        let engine = KernelEngine::<f64>::new(&cfg, &g, &neg).unwrap();
        let x = EmbeddingMatrix::new(array![[0.1, 0.2], [0.3, -0.1], [0.0, 0.5], [-0.2, 0.2]]);
        let zeros = engine.scores(&x).unwrap().s_a.map_indexed(|_, _, _| 0.0);
        let scores = ScorePair::from_parts(zeros.clone(), zeros).unwrap();
        let kernels = engine.link_kernels(&scores).unwrap();
        let out = engine.apply_kernels(&x, kernels, false).unwrap();
        assert_eq!(out.x.values(), x.values());
    }

    #[test]
    fn sign_structure_requires_unpropagated_kernel() {
        let (g, neg) = toy();
        let cfg = model_config(Model::LightGcn { layers: 1 }, 0.1, 0.0, 1.0, NormOverrides::default()).unwrap();
        let h = Array2::<f64>::zeros((4, 4));
        assert!(matches!(sign_structure(&h, &g, &neg, &cfg), Err(Error::InvalidConfig(_))));

        let mf = model_config(Model::Mf, 0.1, 0.0, 1.0, NormOverrides::default()).unwrap();
        let mut bad = Array2::<f64>::zeros((4, 4));
        bad[[0, 3]] = 0.2;
        match sign_structure(&bad, &g, &neg, &mf) {
            Err(Error::SignViolation { violations }) => assert_eq!(violations, vec![(0, 3, 0.2)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn trace_has_four_entries() {
        let (g, neg) = toy();
        let cfg = model_config(Model::LightGcn { layers: 2 }, 0.1, 0.0, 1.0, NormOverrides::default()).unwrap();
        let engine = KernelEngine::<f64>::new(&cfg, &g, &neg).unwrap();
        let x = EmbeddingMatrix::new(Array2::from_elem((4, 2), 0.3));
        let step = engine.step(&x, true).unwrap();
        let trace = step.trace.unwrap();
        assert_eq!(trace.entries.iter().map(|e| e.0).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        assert!(engine.step(&x, false).unwrap().trace.is_none());
    }
}
