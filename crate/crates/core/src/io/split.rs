//! Per-user train/validation/test splitting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::SplitSet;
use crate::graph::Graph;

pub const DEFAULT_RATIOS: [f64; 3] = [0.8, 0.1, 0.1];

/// Shuffles each user's items and cuts them by `ratios`
/// (train, validation, test). Rounding is carried across users so the
/// global counts stay within one edge of the ratios. Every user with at
/// least one edge keeps one in train; users whose test list ends up empty
/// are flagged.
pub fn split_dataset(graph: &Graph, ratios: [f64; 3], seed: u64) -> Result<SplitSet> {
    let partition = graph.partition().ok_or(Error::MissingPartition)?;
    if ratios.iter().any(|r| !(*r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "split ratios {ratios:?} must be nonnegative and sum to 1"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nu = partition.num_users;
    let mut train = Vec::with_capacity(nu);
    let mut validation = Vec::with_capacity(nu);
    let mut test = Vec::with_capacity(nu);
    let mut flagged_users = Vec::new();

    let mut seen = 0usize;
    let (mut given_val, mut given_test) = (0usize, 0usize);
    for user in 0..nu {
        let mut items: Vec<usize> = graph.neighbors(user).iter().map(|&v| v - nu).collect();
        items.shuffle(&mut rng);
        let degree = items.len();
        seen += degree;
        let want_val = (ratios[1] * seen as f64).round() as usize;
        let want_test = (ratios[2] * seen as f64).round() as usize;
        let spare = degree.saturating_sub(1);
        let n_test = want_test.saturating_sub(given_test).min(spare);
        let n_val = want_val.saturating_sub(given_val).min(spare - n_test);
        given_test += n_test;
        given_val += n_val;

        let mut te: Vec<usize> = items[..n_test].to_vec();
        let mut va: Vec<usize> = items[n_test..n_test + n_val].to_vec();
        let mut tr: Vec<usize> = items[n_test + n_val..].to_vec();
        te.sort_unstable();
        va.sort_unstable();
        tr.sort_unstable();
        if te.is_empty() {
            flagged_users.push(user);
        }
        train.push(tr);
        validation.push(va);
        test.push(te);
    }
    Ok(SplitSet {
        partition,
        train,
        validation,
        test,
        seed,
        ratios,
        flagged_users,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::random_bipartite;

    #[test]
    fn all_train() {
        let g = random_bipartite(10, 20, 0.3, 1).unwrap();
        let s = split_dataset(&g, [1.0, 0.0, 0.0], 3).unwrap();
        assert_eq!(s.counts(), (g.num_edges(), 0, 0));
        assert_eq!(s.train_graph().unwrap(), g);
    }

    #[test]
    fn single_edge_user_is_flagged() {
        let p = crate::graph::Partition {
            num_users: 2,
            num_items: 3,
        };
        let g = Graph::new(5, [(0, 2), (1, 2), (1, 3), (1, 4)], Some(p)).unwrap();
        let s = split_dataset(&g, [0.0, 0.0, 1.0], 0).unwrap();
        assert_eq!(s.train[0], vec![0]);
        assert!(s.flagged_users.contains(&0));
        assert_eq!(s.train[1].len(), 1);
    }

    #[test]
    fn rejects_bad_ratios() {
        let g = random_bipartite(3, 3, 0.5, 1).unwrap();
        assert!(split_dataset(&g, [0.5, 0.5, 0.5], 0).is_err());
        assert!(split_dataset(&g, [1.2, -0.2, 0.0], 0).is_err());
    }
}
