//! Sampled negative links `B`.
//!
//! For every observed edge, `ratio` non-edges are drawn once, before training.
//! On bipartite graphs the user end of the edge is kept and an item the user
//! has not interacted with is drawn; on general graphs a random endpoint is
//! kept. Pairs are drawn without replacement, so `B` is a 0/1 matrix.

use std::collections::HashSet;
use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NormScheme, NormalizedAdjacency};
use crate::scalar::Scalar;
use crate::sparse::CsrMatrix;

/// Rejection attempts per draw before falling back to explicit enumeration.
const MAX_REJECTIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplingStrategy {
    Uniform,
    /// Target nodes drawn with probability proportional to `degree^exponent`.
    DegreePower { exponent: f64 },
}

impl SamplingStrategy {
    /// The LINE noise distribution, `degree^{3/4}`.
    pub const LINE_NOISE: SamplingStrategy = SamplingStrategy::DegreePower { exponent: 0.75 };
}

impl fmt::Display for SamplingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplingStrategy::Uniform => f.write_str("uniform"),
            SamplingStrategy::DegreePower { exponent } => write!(f, "degree_power({exponent})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeSet {
    num_nodes: usize,
    /// Canonical `(u, v)` with `u < v`, sorted.
    pairs: Vec<(usize, usize)>,
    strategy: SamplingStrategy,
    seed: u64,
    ratio: usize,
}

impl NegativeSet {
    /// Wraps an explicit pair list. Fails if a pair is a self-pair, out of
    /// range, or an observed edge of `graph`.
    pub fn from_pairs(graph: &Graph, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let n = graph.num_nodes();
        let mut canon = Vec::new();
        for (u, v) in pairs {
            for node in [u, v] {
                if node >= n {
                    return Err(Error::NodeOutOfRange { node, num_nodes: n });
                }
            }
            if u == v {
                return Err(Error::SelfLoop { node: u });
            }
            if graph.has_edge(u, v) {
                return Err(Error::InvalidConfig(format!(
                    "negative pair ({u}, {v}) is an observed edge"
                )));
            }
            canon.push((u.min(v), u.max(v)));
        }
        canon.sort_unstable();
        canon.dedup();
        Ok(Self {
            num_nodes: n,
            pairs: canon,
            strategy: SamplingStrategy::Uniform,
            seed: 0,
            ratio: 1,
        })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn strategy(&self) -> SamplingStrategy {
        self.strategy
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn ratio(&self) -> usize {
        self.ratio
    }

    /// Symmetric 0/1 matrix `B`.
    pub fn adjacency<T: Scalar>(&self) -> CsrMatrix<T> {
        let triplets = self
            .pairs
            .iter()
            .flat_map(|&(u, v)| [(u, v, T::one()), (v, u, T::one())])
            .collect();
        CsrMatrix::from_triplets(self.num_nodes, self.num_nodes, triplets)
    }

    /// `B` viewed as an ordinary graph.
    pub fn as_graph(&self) -> Graph {
        Graph::new(self.num_nodes, self.pairs.iter().copied(), None)
            .expect("negative pairs are valid edges")
    }

    /// Same pairs, nodes relabelled by `perm[old] = new`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut pairs: Vec<_> = self
            .pairs
            .iter()
            .map(|&(u, v)| (perm[u].min(perm[v]), perm[u].max(perm[v])))
            .collect();
        pairs.sort_unstable();
        Self {
            pairs,
            ..self.clone()
        }
    }
}

/// `degree(v)^exponent`, zero for isolated nodes.
pub fn degree_power_weights(graph: &Graph, exponent: f64) -> Vec<f64> {
    (0..graph.num_nodes())
        .map(|v| match graph.degree(v) {
            0 => 0.0,
            d => (d as f64).powf(exponent),
        })
        .collect()
}

/// Draws nodes from a fixed weight vector.
#[derive(Debug, Clone)]
pub struct NodeSampler {
    nodes: Vec<usize>,
    weights: Vec<f64>,
    dist: WeightedIndex<f64>,
}

impl NodeSampler {
    /// `None` when no node has positive weight.
    pub fn new(nodes: Vec<usize>, weights: Vec<f64>) -> Option<Self> {
        let dist = WeightedIndex::new(weights.iter().copied()).ok()?;
        Some(Self {
            nodes,
            weights,
            dist,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.nodes[self.dist.sample(rng)]
    }

    fn candidates(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

fn target_sampler(graph: &Graph, strategy: SamplingStrategy) -> Option<NodeSampler> {
    let nodes: Vec<usize> = match graph.partition() {
        Some(p) => (p.num_users..graph.num_nodes()).collect(),
        None => (0..graph.num_nodes()).collect(),
    };
    let weights = match strategy {
        SamplingStrategy::Uniform => vec![1.0; nodes.len()],
        SamplingStrategy::DegreePower { exponent } => {
            let all = degree_power_weights(graph, exponent);
            nodes.iter().map(|&v| all[v]).collect()
        }
    };
    NodeSampler::new(nodes, weights)
}

pub fn sample_negatives(
    graph: &Graph,
    strategy: SamplingStrategy,
    ratio: usize,
    seed: u64,
) -> Result<NegativeSet> {
    if let SamplingStrategy::DegreePower { exponent } = strategy {
        if !(exponent >= 0.0) {
            return Err(Error::InvalidConfig(format!("negative exponent {exponent}")));
        }
    }
    let quota = ratio * graph.num_edges();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drawn: HashSet<(usize, usize)> = HashSet::with_capacity(quota);
    let mut pairs = Vec::with_capacity(quota);

    if let Some(sampler) = target_sampler(graph, strategy) {
        let eligible = |s: usize, t: usize, drawn: &HashSet<(usize, usize)>| {
            s != t && !graph.has_edge(s, t) && !drawn.contains(&(s.min(t), s.max(t)))
        };
        for &(u, v) in graph.edges() {
            for _ in 0..ratio {
                let source = if graph.partition().is_some() || rng.random_bool(0.5) {
                    u
                } else {
                    v
                };
                let mut target = None;
                for _ in 0..MAX_REJECTIONS {
                    let t = sampler.sample(&mut rng);
                    if eligible(source, t, &drawn) {
                        target = Some(t);
                        break;
                    }
                }
                if target.is_none() {
                    let (nodes, weights): (Vec<usize>, Vec<f64>) = sampler
                        .candidates()
                        .filter(|&(t, w)| w > 0.0 && eligible(source, t, &drawn))
                        .unzip();
                    target = NodeSampler::new(nodes, weights).map(|s| s.sample(&mut rng));
                }
                if let Some(t) = target {
                    let key = (source.min(t), source.max(t));
                    drawn.insert(key);
                    pairs.push(key);
                }
            }
        }
    }

    if pairs.len() < quota {
        return Err(Error::QuotaUnreachable {
            achieved: pairs.len(),
            quota,
        });
    }
    pairs.sort_unstable();
    Ok(NegativeSet {
        num_nodes: graph.num_nodes(),
        pairs,
        strategy,
        seed,
        ratio,
    })
}

pub fn normalize_negatives<T: Scalar>(
    negatives: &NegativeSet,
    scheme: NormScheme,
) -> NormalizedAdjacency<T> {
    NormalizedAdjacency::from_matrix(&negatives.adjacency(), scheme)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize, Partition};

    fn small_bipartite() -> Graph {
        let p = Partition {
            num_users: 2,
            num_items: 3,
        };
        Graph::new(5, [(0, 2), (1, 3)], Some(p)).unwrap()
    }

    #[test]
    fn bipartite_ratio_one_gives_one_pair_per_edge() {
        let g = small_bipartite();
        let neg = sample_negatives(&g, SamplingStrategy::Uniform, 1, 7).unwrap();
        assert_eq!(neg.len(), 2);
        for &(u, v) in neg.pairs() {
            assert!(!g.has_edge(u, v));
            assert!(u < 2 && v >= 2, "pair ({u}, {v}) must join user and item");
        }
    }

    #[test]
    fn same_seed_same_pairs() {
        let g = small_bipartite();
        let a = sample_negatives(&g, SamplingStrategy::Uniform, 1, 42).unwrap();
        let b = sample_negatives(&g, SamplingStrategy::Uniform, 1, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn complete_bipartite_is_unreachable() {
        let p = Partition {
            num_users: 2,
            num_items: 2,
        };
        let g = Graph::new(4, [(0, 2), (0, 3), (1, 2), (1, 3)], Some(p)).unwrap();
        match sample_negatives(&g, SamplingStrategy::Uniform, 1, 0) {
            Err(Error::QuotaUnreachable { achieved, quota }) => {
                assert_eq!(achieved, 0);
                assert_eq!(quota, 4);
            }
            other => panic!("expected quota error, got {other:?}"),
        }
    }

    #[test]
    fn saturated_user_reports_achieved_count() {
        let p = Partition {
            num_users: 1,
            num_items: 4,
        };
        let g = Graph::new(5, [(0, 1), (0, 2), (0, 3)], Some(p)).unwrap();
        let neg = sample_negatives(&g, SamplingStrategy::Uniform, 1, 3);
        // 3 positives but only one candidate item for the only user.
        assert!(matches!(neg, Err(Error::QuotaUnreachable { achieved: 1, quota: 3 })));
    }

    #[test]
    fn degree_power_weight_examples() {
        let star16 = Graph::new(17, (1..17).map(|i| (0, i)), None).unwrap();
        let w = degree_power_weights(&star16, 0.75);
        assert!((w[0] - 8.0).abs() < 1e-12);
        assert_eq!(w[1], 1.0);

        let g = Graph::new(4, [(0, 1), (1, 2)], None).unwrap();
        assert_eq!(degree_power_weights(&g, 0.0), vec![1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn normalized_negatives_match_graph_normalization() {
        let g = small_bipartite();
        let neg = sample_negatives(&g, SamplingStrategy::Uniform, 1, 1).unwrap();
        for scheme in [NormScheme::None, NormScheme::Row, NormScheme::Symmetric] {
            let a = normalize_negatives::<f64>(&neg, scheme);
            let b = normalize::<f64>(&neg.as_graph(), scheme);
            assert_eq!(a.matrix().to_dense(), b.matrix().to_dense());
        }
        let row = normalize_negatives::<f64>(&neg, NormScheme::Row);
        for (r, s) in row.matrix().row_sums().into_iter().enumerate() {
            if row.matrix().row_nnz(r) > 0 {
                assert!((s - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_pair_row_normalized_is_one() {
        let g = Graph::new(3, [(0, 1)], None).unwrap();
        let neg = NegativeSet::from_pairs(&g, [(0, 2)]).unwrap();
        let row = normalize_negatives::<f64>(&neg, NormScheme::Row);
        assert_eq!(row.matrix().get(0, 2), Some(1.0));
        assert_eq!(row.matrix().get(2, 0), Some(1.0));
        assert!(NegativeSet::from_pairs(&g, [(1, 0)]).is_err());
    }
}
