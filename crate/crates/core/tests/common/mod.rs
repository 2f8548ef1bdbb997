#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unilink::negative::sample_negatives;
use unilink::synth::random_graph;
use unilink::{Embedding, Graph, Model, NegativeSet, SamplingStrategy};

pub const MODELS: [Model; 8] = [
    Model::Mf,
    Model::Line,
    Model::DeepWalk { window: 1 },
    Model::DeepWalk { window: 2 },
    Model::DeepWalk { window: 5 },
    Model::LightGcn { layers: 1 },
    Model::LightGcn { layers: 3 },
    Model::LightGcn { layers: 5 },
];

/// A random graph with at least one edge, a ratio-1 uniform negative set and
/// Gaussian-ish embeddings of the given scale.
pub fn instance(seed: u64, n: usize, p: f64, d: usize, scale: f64) -> (Graph, NegativeSet, Embedding) {
    let mut s = seed;
    loop {
        let g = random_graph(n, p, s).unwrap();
        if g.num_edges() > 0 {
            if let Ok(neg) = sample_negatives(&g, SamplingStrategy::Uniform, 1, s) {
                return (g, neg, random_embedding(n, d, scale, s));
            }
        }
        s += 1_000_003;
    }
}

pub fn random_embedding(n: usize, d: usize, scale: f64, seed: u64) -> Embedding {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    Embedding::new(Array2::from_shape_simple_fn((n, d), || scale * (2.0 * rng.random::<f64>() - 1.0)))
}

pub fn max_abs(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
