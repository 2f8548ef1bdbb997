//! Top-K evaluation against all non-interacted items.

use std::cmp::Ordering;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Partition};
use crate::scalar::Scalar;

/// Per-user train/validation/test item lists (item indices local to the
/// item block, sorted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSet {
    pub partition: Partition,
    pub train: Vec<Vec<usize>>,
    pub validation: Vec<Vec<usize>>,
    pub test: Vec<Vec<usize>>,
    pub seed: u64,
    pub ratios: [f64; 3],
    /// Users left with an empty test list.
    pub flagged_users: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalTarget {
    Validation,
    Test,
}

impl SplitSet {
    fn graph_of(&self, lists: &[Vec<usize>]) -> Result<Graph> {
        let p = self.partition;
        let edges = lists
            .iter()
            .enumerate()
            .flat_map(|(u, items)| items.iter().map(move |&i| (u, p.num_users + i)));
        Graph::new(p.num_users + p.num_items, edges, Some(p))
    }

    pub fn train_graph(&self) -> Result<Graph> {
        self.graph_of(&self.train)
    }

    pub fn validation_graph(&self) -> Result<Graph> {
        self.graph_of(&self.validation)
    }

    pub fn test_graph(&self) -> Result<Graph> {
        self.graph_of(&self.test)
    }

    pub fn target(&self, which: EvalTarget) -> &[Vec<usize>] {
        match which {
            EvalTarget::Validation => &self.validation,
            EvalTarget::Test => &self.test,
        }
    }

    /// Edge counts `(train, validation, test)`.
    pub fn counts(&self) -> (usize, usize, usize) {
        let c = |l: &[Vec<usize>]| l.iter().map(Vec::len).sum();
        (c(&self.train), c(&self.validation), c(&self.test))
    }
}

/// Inner-product scores of `user` against every item; items the user
/// trained on are masked to `-inf`.
pub fn score_user<T: Scalar>(representation: &Array2<T>, user: usize, train: &Graph) -> Result<Vec<f64>> {
    let p = train.partition().ok_or(Error::MissingPartition)?;
    if representation.nrows() != train.num_nodes() {
        return Err(Error::shape(train.num_nodes(), representation.nrows()));
    }
    if user >= p.num_users {
        return Err(Error::NodeOutOfRange {
            node: user,
            num_nodes: p.num_users,
        });
    }
    let xu = representation.row(user);
    let mut scores: Vec<f64> = (0..p.num_items)
        .map(|i| {
            let xi = representation.row(p.item_node(i));
            xu.iter().zip(xi.iter()).map(|(a, b)| *a * *b).sum::<T>().to_f64_lossy()
        })
        .collect();
    for &node in train.neighbors(user) {
        scores[node - p.num_users] = f64::NEG_INFINITY;
    }
    Ok(scores)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopK {
    pub items: Vec<usize>,
    /// Fewer than K candidates were available.
    pub short: bool,
}

fn rank_order(scores: &[f64], a: usize, b: usize) -> Ordering {
    scores[b].total_cmp(&scores[a]).then(a.cmp(&b))
}

/// The K best candidates (score `-inf` and NaN are not candidates), best
/// first, ties broken by ascending item index.
pub fn top_k(scores: &[f64], k: usize) -> TopK {
    let mut idx: Vec<usize> = (0..scores.len())
        .filter(|&i| scores[i] > f64::NEG_INFINITY)
        .collect();
    let short = idx.len() < k;
    if idx.len() > k && k > 0 {
        idx.select_nth_unstable_by(k - 1, |&a, &b| rank_order(scores, a, b));
        idx.truncate(k);
    }
    idx.sort_unstable_by(|&a, &b| rank_order(scores, a, b));
    idx.truncate(k);
    TopK { items: idx, short }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub ndcg: f64,
}

/// Binary-relevance Precision, Recall and NDCG at `k`. `relevant` must be
/// sorted. IDCG counts `min(k, |relevant|)` ideal hits.
pub fn metrics_at_k(ranked: &[usize], relevant: &[usize], k: usize) -> Metrics {
    debug_assert!(relevant.windows(2).all(|w| w[0] < w[1]));
    let mut hits = 0usize;
    let mut dcg = 0.0;
    for (pos, item) in ranked.iter().take(k).enumerate() {
        if relevant.binary_search(item).is_ok() {
            hits += 1;
            dcg += 1.0 / ((pos + 2) as f64).log2();
        }
    }
    let idcg: f64 = (0..k.min(relevant.len()))
        .map(|pos| 1.0 / ((pos + 2) as f64).log2())
        .sum();
    Metrics {
        precision: hits as f64 / k as f64,
        recall: if relevant.is_empty() {
            0.0
        } else {
            hits as f64 / relevant.len() as f64
        },
        ndcg: if idcg > 0.0 { dcg / idcg } else { 0.0 },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub ndcg: f64,
    pub evaluated_users: usize,
    pub skipped_users: usize,
}

/// Mean metrics over users whose target list is non-empty.
pub fn evaluate<T: Scalar>(
    representation: &Array2<T>,
    train: &Graph,
    splits: &SplitSet,
    target: EvalTarget,
    k: usize,
) -> Result<EvalResult> {
    if k == 0 {
        return Err(Error::InvalidConfig("K must be >= 1".into()));
    }
    let lists = splits.target(target);
    let per_user: Vec<Option<Metrics>> = (0..lists.len())
        .into_par_iter()
        .map(|u| -> Result<Option<Metrics>> {
            if lists[u].is_empty() {
                return Ok(None);
            }
            let scores = score_user(representation, u, train)?;
            let ranked = top_k(&scores, k);
            Ok(Some(metrics_at_k(&ranked.items, &lists[u], k)))
        })
        .collect::<Result<_>>()?;
    let evaluated: Vec<Metrics> = per_user.iter().flatten().copied().collect();
    if evaluated.is_empty() {
        return Err(Error::NoEvaluableUsers);
    }
    let n = evaluated.len() as f64;
    let mean = |f: fn(&Metrics) -> f64| evaluated.iter().map(f).sum::<f64>() / n;
    Ok(EvalResult {
        k,
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        ndcg: mean(|m| m.ndcg),
        evaluated_users: evaluated.len(),
        skipped_users: lists.len() - evaluated.len(),
    })
}

/// Validation Recall@K, the early-stopping signal.
pub struct RecallValidator<'a> {
    pub train: &'a Graph,
    pub splits: &'a SplitSet,
    pub k: usize,
}

impl<T: Scalar> crate::trainer::Validator<T> for RecallValidator<'_> {
    fn validate(&self, representation: &Array2<T>) -> Result<f64> {
        Ok(evaluate(representation, self.train, self.splits, EvalTarget::Validation, self.k)?.recall)
    }
}
