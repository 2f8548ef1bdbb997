//! Seeded random graphs: Erdős–Rényi, uniform bipartite, and a bipartite
//! generator with planted user/item communities used for the bundled
//! benchmark datasets.

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Partition};

/// `G(n, p)`.
pub fn random_graph(num_nodes: usize, p: f64, seed: u64) -> Result<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..num_nodes {
        for v in (u + 1)..num_nodes {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::new(num_nodes, edges, None)
}

/// Every user-item pair independently with probability `p`.
pub fn random_bipartite(num_users: usize, num_items: usize, p: f64, seed: u64) -> Result<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..num_users {
        for i in 0..num_items {
            if rng.random::<f64>() < p {
                edges.push((u, num_users + i));
            }
        }
    }
    let partition = Partition { num_users, num_items };
    Graph::new(num_users + num_items, edges, Some(partition))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunitySpec {
    pub num_users: usize,
    pub num_items: usize,
    pub communities: usize,
    /// Interactions per user are uniform on `[mean/2, 3·mean/2]`.
    pub mean_degree: f64,
    /// Probability that an interaction stays inside the user's community.
    pub affinity: f64,
    /// Zipf exponent of item popularity within a community.
    pub popularity: f64,
    pub seed: u64,
}

impl CommunitySpec {
    /// 20 users, 30 items.
    pub fn toy50() -> Self {
        Self {
            num_users: 20,
            num_items: 30,
            communities: 2,
            mean_degree: 6.0,
            affinity: 0.85,
            popularity: 0.5,
            seed: 50,
        }
    }

    /// 80 users, 120 items.
    pub fn synth200() -> Self {
        Self {
            num_users: 80,
            num_items: 120,
            communities: 4,
            mean_degree: 10.0,
            affinity: 0.8,
            popularity: 0.6,
            seed: 200,
        }
    }

    /// 200 users, 300 items.
    pub fn synth500() -> Self {
        Self {
            num_users: 200,
            num_items: 300,
            communities: 5,
            mean_degree: 14.0,
            affinity: 0.8,
            popularity: 0.6,
            seed: 500,
        }
    }
}

/// Users and items are assigned to communities round-robin; each user picks
/// distinct items, from its own community with probability `affinity` and
/// from the whole catalogue otherwise, weighted by a Zipf popularity.
pub fn community_bipartite(spec: &CommunitySpec) -> Result<Graph> {
    let CommunitySpec {
        num_users,
        num_items,
        communities,
        mean_degree,
        affinity,
        popularity,
        seed,
    } = *spec;
    if communities == 0 || communities > num_items || num_users == 0 {
        return Err(Error::InvalidConfig(format!(
            "{communities} communities for {num_users} users and {num_items} items"
        )));
    }
    if !(0.0..=1.0).contains(&affinity) || !(mean_degree >= 1.0) {
        return Err(Error::InvalidConfig("affinity must be in [0,1] and mean degree >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weight = |rank: usize| 1.0 / ((rank + 1) as f64).powf(popularity);

    let members: Vec<Vec<usize>> = (0..communities)
        .map(|c| (c..num_items).step_by(communities).collect())
        .collect();
    let local = |items: &[usize]| -> Result<WeightedIndex<f64>> {
        WeightedIndex::new((0..items.len()).map(weight))
            .map_err(|e| Error::InvalidConfig(format!("popularity weights: {e}")))
    };
    let local_dists = members.iter().map(|m| local(m)).collect::<Result<Vec<_>>>()?;
    let global_order: Vec<usize> = (0..num_items).collect();
    let global_dist = local(&global_order)?;

    let lo = (mean_degree / 2.0).floor().max(1.0) as usize;
    let hi = ((1.5 * mean_degree).ceil() as usize).max(lo).min(num_items);
    let mut edges = Vec::new();
    for u in 0..num_users {
        let c = u % communities;
        let want = rng.random_range(lo.min(hi)..=hi);
        let mut chosen: Vec<usize> = Vec::with_capacity(want);
        let mut attempts = 0;
        while chosen.len() < want && attempts < 50 * want {
            attempts += 1;
            let item = if rng.random::<f64>() < affinity {
                members[c][rng.sample(&local_dists[c])]
            } else {
                global_order[rng.sample(&global_dist)]
            };
            if !chosen.contains(&item) {
                chosen.push(item);
            }
        }
        edges.extend(chosen.into_iter().map(|i| (u, num_users + i)));
    }
    // Items nobody picked get one user from their own community.
    let mut picked = vec![false; num_items];
    for &(_, v) in &edges {
        picked[v - num_users] = true;
    }
    for item in (0..num_items).filter(|&i| !picked[i]) {
        let c = item % communities;
        let in_community = (num_users - c).div_ceil(communities);
        let user = c + communities * rng.random_range(0..in_community);
        edges.push((user, num_users + item));
    }
    let partition = Partition { num_users, num_items };
    Graph::new(num_users + num_items, edges, Some(partition))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_simple() {
        let a = random_graph(20, 0.3, 1).unwrap();
        let b = random_graph(20, 0.3, 1).unwrap();
        assert_eq!(a.edges(), b.edges());
        assert!(a.edges().iter().all(|&(u, v)| u < v));
    }

    #[test]
    fn bipartite_edges_cross_blocks() {
        let g = random_bipartite(5, 7, 0.5, 3).unwrap();
        let p = g.partition().unwrap();
        assert!(g.edges().iter().all(|&(u, v)| p.is_user(u) && !p.is_user(v)));
    }

    #[test]
    fn community_graph_prefers_own_community() {
        let spec = CommunitySpec::synth500();
        let g = community_bipartite(&spec).unwrap();
        assert_eq!(g.num_nodes(), 500);
        let inside = g
            .edges()
            .iter()
            .filter(|&&(u, v)| u % spec.communities == (v - spec.num_users) % spec.communities)
            .count();
        assert!(inside as f64 > 0.7 * g.num_edges() as f64);
        assert!((0..g.num_nodes()).all(|v| g.degree(v) >= 1));
        assert_eq!(g.edges(), community_bipartite(&spec).unwrap().edges());
    }
}
