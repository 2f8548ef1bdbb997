//! Brute-force dense references for tests. Everything here is written with
//! plain index loops over `f64` and deliberately avoids the sparse and
//! propagation code it is used to check. Single-threaded.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::{Graph, NormScheme};
use crate::kernel::KernelConfig;
use crate::negative::NegativeSet;
use crate::objectives::Model;

pub const DENSE_LIMIT: usize = 500;

fn check_limit(n: usize) -> Result<()> {
    if n > DENSE_LIMIT {
        return Err(Error::DenseLimit {
            nodes: n,
            limit: DENSE_LIMIT,
        });
    }
    Ok(())
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn log_sigmoid(z: f64) -> f64 {
    if z > 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

pub fn dense_adjacency(graph: &Graph) -> Result<Array2<f64>> {
    let n = graph.num_nodes();
    check_limit(n)?;
    let mut a = Array2::zeros((n, n));
    for &(u, v) in graph.edges() {
        a[[u, v]] = 1.0;
        a[[v, u]] = 1.0;
    }
    Ok(a)
}

pub fn dense_negatives(negatives: &NegativeSet) -> Result<Array2<f64>> {
    let n = negatives.num_nodes();
    check_limit(n)?;
    let mut b = Array2::zeros((n, n));
    for &(u, v) in negatives.pairs() {
        b[[u, v]] = 1.0;
        b[[v, u]] = 1.0;
    }
    Ok(b)
}

/// `D⁻¹M` or `D^-½ M D^-½` with zero-degree rows left at zero.
pub fn dense_normalize(m: &Array2<f64>, scheme: NormScheme) -> Array2<f64> {
    let n = m.nrows();
    let mut deg = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            deg[i] += m[[i, j]];
        }
    }
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            out[[i, j]] = match scheme {
                NormScheme::None => m[[i, j]],
                NormScheme::Row if deg[i] > 0.0 => m[[i, j]] / deg[i],
                NormScheme::Symmetric if deg[i] > 0.0 && deg[j] > 0.0 => {
                    m[[i, j]] / (deg[i].sqrt() * deg[j].sqrt())
                }
                _ => 0.0,
            };
        }
    }
    out
}

pub fn matmul(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    assert_eq!(a.ncols(), b.nrows());
    let mut c = Array2::zeros((a.nrows(), b.ncols()));
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            let aik = a[[i, k]];
            if aik == 0.0 {
                continue;
            }
            for j in 0..b.ncols() {
                c[[i, j]] += aik * b[[k, j]];
            }
        }
    }
    c
}

pub fn transpose(a: &Array2<f64>) -> Array2<f64> {
    let mut t = Array2::zeros((a.ncols(), a.nrows()));
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            t[[j, i]] = a[[i, j]];
        }
    }
    t
}

pub fn identity(n: usize) -> Array2<f64> {
    let mut eye = Array2::zeros((n, n));
    for i in 0..n {
        eye[[i, i]] = 1.0;
    }
    eye
}

/// `M^k` by repeated multiplication.
pub fn matrix_power(m: &Array2<f64>, k: usize) -> Array2<f64> {
    let mut out = identity(m.nrows());
    for _ in 0..k {
        out = matmul(&out, m);
    }
    out
}

/// `(Σ_{k=a}^{b} M^k) / (b - a + 1)` from explicit powers.
pub fn power_average(m: &Array2<f64>, a: usize, b: usize) -> Result<Array2<f64>> {
    if a > b {
        return Err(Error::InvalidOrder { a, b });
    }
    let n = m.nrows();
    let mut sum = Array2::<f64>::zeros((n, n));
    for k in a..=b {
        let p = matrix_power(m, k);
        for i in 0..n {
            for j in 0..n {
                sum[[i, j]] += p[[i, j]];
            }
        }
    }
    let count = (b - a + 1) as f64;
    Ok(sum.mapv(|v| v / count))
}

/// Dense copies of everything one model's loss depends on.
#[derive(Debug, Clone)]
pub struct DenseSnapshot {
    pub a: Array2<f64>,
    pub b: Array2<f64>,
    pub pos_mask: Array2<f64>,
    pub neg_mask: Array2<f64>,
    pub propagation: Array2<f64>,
}

impl DenseSnapshot {
    pub fn build(graph: &Graph, negatives: &NegativeSet, model: Model) -> Result<Self> {
        let a = dense_adjacency(graph)?;
        let b = dense_negatives(negatives)?;
        let n = a.nrows();
        let (pos_mask, neg_mask, propagation) = match model {
            Model::Mf => (a.clone(), b.clone(), identity(n)),
            Model::Line => (dense_normalize(&a, NormScheme::Row), b.clone(), identity(n)),
            Model::DeepWalk { window } => (
                power_average(&dense_normalize(&a, NormScheme::Row), 1, window)?,
                dense_normalize(&b, NormScheme::Row),
                identity(n),
            ),
            Model::LightGcn { layers } => (
                a.clone(),
                b.clone(),
                power_average(&dense_normalize(&a, NormScheme::Symmetric), 0, layers)?,
            ),
        };
        Ok(Self {
            a,
            b,
            pos_mask,
            neg_mask,
            propagation,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.a.nrows()
    }

    pub fn loss(&self, x: &Array2<f64>, lambda: f64, beta: f64) -> Result<f64> {
        let xbar = matmul(&self.propagation, x);
        let data = brute_force_loss(&xbar, &self.pos_mask, &self.neg_mask, lambda, 0.0)?;
        let mut sq = 0.0;
        for v in x.iter() {
            sq += v * v;
        }
        Ok(data + 0.5 * beta * sq)
    }
}

/// `-½ Σ_i Σ_j [M⁺_ij log σ(x_i·x_j) + λ M⁻_ij log σ(-x_i·x_j)] + β/2 ‖X‖²`
/// as a literal double loop.
pub fn brute_force_loss(
    x: &Array2<f64>,
    pos_mask: &Array2<f64>,
    neg_mask: &Array2<f64>,
    lambda: f64,
    beta: f64,
) -> Result<f64> {
    let n = x.nrows();
    check_limit(n)?;
    let d = x.ncols();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (mp, mn) = (pos_mask[[i, j]], neg_mask[[i, j]]);
            if mp == 0.0 && mn == 0.0 {
                continue;
            }
            let mut s = 0.0;
            for k in 0..d {
                s += x[[i, k]] * x[[j, k]];
            }
            if mp != 0.0 {
                total += mp * log_sigmoid(s);
            }
            if mn != 0.0 {
                total += lambda * mn * log_sigmoid(-s);
            }
        }
    }
    let mut sq = 0.0;
    for v in x.iter() {
        sq += v * v;
    }
    Ok(-0.5 * total + 0.5 * beta * sq)
}

/// Central differences `(f(X + hE_ij) - f(X - hE_ij)) / 2h`.
pub fn finite_difference_gradient(
    f: impl Fn(&Array2<f64>) -> f64,
    x: &Array2<f64>,
    h: f64,
) -> Result<Array2<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidConfig(format!("step h = {h} must be > 0")));
    }
    check_limit(x.nrows())?;
    let mut grad = Array2::zeros(x.dim());
    let mut probe = x.clone();
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let orig = probe[[i, j]];
            probe[[i, j]] = orig + h;
            let up = f(&probe);
            probe[[i, j]] = orig - h;
            let down = f(&probe);
            probe[[i, j]] = orig;
            grad[[i, j]] = (up - down) / (2.0 * h);
        }
    }
    Ok(grad)
}

/// `max|g - ĝ| / max(1, ‖g‖_∞)`.
pub fn relative_error(analytic: &Array2<f64>, numeric: &Array2<f64>) -> f64 {
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for (g, n) in analytic.iter().zip(numeric.iter()) {
        diff = diff.max((g - n).abs());
        scale = scale.max(g.abs());
    }
    diff / scale
}

/// Dense `H` of one kernel step at `x`, built from explicit power sums and
/// Hadamard products.
pub fn dense_kernel(
    x: &Array2<f64>,
    config: &KernelConfig,
    graph: &Graph,
    negatives: &NegativeSet,
) -> Result<Array2<f64>> {
    let a = dense_adjacency(graph)?;
    let b = dense_negatives(negatives)?;
    let n = a.nrows();
    if x.nrows() != n {
        return Err(Error::shape(n, x.nrows()));
    }
    let a_tilde = dense_normalize(&a, config.pos_norm);
    let p = power_average(&a_tilde, config.a1, config.b1)?;
    let (pos, neg) = if config.c3 == 1.0 {
        (
            power_average(&a_tilde, config.a2, config.b2)?,
            dense_normalize(&b, config.neg_norm),
        )
    } else {
        (a.clone(), b.clone())
    };

    let xbar = matmul(&p, x);
    let gram = matmul(&xbar, &transpose(&xbar));
    let mut signed = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let s_b = sigmoid(gram[[i, j]]);
            let s_a = 1.0 - s_b;
            signed[[i, j]] = s_a * pos[[i, j]] - config.lambda * s_b * neg[[i, j]];
        }
    }
    let mut sym = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            sym[[i, j]] = 0.5 * (signed[[i, j]] + signed[[j, i]]);
        }
    }
    let mut h = matmul(&matmul(&transpose(&p), &sym), &p);
    for i in 0..n {
        for j in 0..n {
            h[[i, j]] *= config.c2;
        }
        h[[i, i]] += config.c1;
    }
    Ok(h)
}

/// `H X` with `H` from [`dense_kernel`].
pub fn dense_kernel_step(
    x: &Array2<f64>,
    config: &KernelConfig,
    graph: &Graph,
    negatives: &NegativeSet,
) -> Result<Array2<f64>> {
    let h = dense_kernel(x, config, graph, negatives)?;
    Ok(matmul(&h, x))
}
