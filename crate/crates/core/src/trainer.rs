//! Full-batch training loops, early stopping and learning-rate/layer grid
//! search.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{mean_positive_kernel, substep_trace};
use crate::embedding::{max_abs_diff, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::graph::{Graph, NormScheme};
use crate::kernel::{model_config, KernelConfig, KernelEngine, NormOverrides};
use crate::negative::{sample_negatives, NegativeSet};
use crate::objectives::{gd_step, LossParams, Model, Objective, DEFAULT_DROP_TOL};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainPath {
    /// Gradient descent on the objective.
    #[default]
    Gradient,
    /// Repeated kernel application.
    Kernel,
    /// Both trajectories from one initialization; the gradient one is kept.
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: Model,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub dim: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub path: TrainPath,
    pub init_scale: f64,
    pub init_seed: u64,
    pub eval_every: usize,
    pub trace_substeps: bool,
    pub drop_tol: f64,
    pub pos_norm: Option<NormScheme>,
    pub neg_norm: Option<NormScheme>,
    /// Redraw `B` before every epoch instead of once.
    pub resample_negatives: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: Model::Mf,
            alpha: 1e-2,
            beta: 0.0,
            lambda: 1.0,
            dim: 64,
            max_epochs: 200,
            patience: 10,
            path: TrainPath::Gradient,
            init_scale: 0.01,
            init_seed: 0,
            eval_every: 1,
            trace_substeps: false,
            drop_tol: DEFAULT_DROP_TOL,
            pos_norm: None,
            neg_norm: None,
            resample_negatives: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be > 0");
        }
        if !(self.beta >= 0.0 && self.lambda >= 0.0) {
            return bad("beta and lambda must be >= 0");
        }
        if self.patience == 0 {
            return bad("patience must be >= 1");
        }
        if self.dim == 0 {
            return bad("dim must be >= 1");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be >= 1");
        }
        if !(self.init_scale > 0.0) {
            return bad("init_scale must be > 0");
        }
        Ok(())
    }

    pub fn kernel_config(&self) -> Result<KernelConfig> {
        model_config(
            self.model,
            self.alpha,
            self.beta,
            self.lambda,
            NormOverrides {
                pos: self.pos_norm,
                neg: self.neg_norm,
            },
        )
    }

    pub fn loss_params<T: Scalar>(&self) -> LossParams<T> {
        LossParams::new(self.model, T::of(self.lambda), T::of(self.beta))
    }
}

/// Entries i.i.d. `N(0, scale²)`, reproducible from `seed`.
pub fn init_embeddings<T: Scalar>(
    num_nodes: usize,
    dim: usize,
    scale: f64,
    seed: u64,
) -> Result<EmbeddingMatrix<T>> {
    let normal = Normal::new(0.0, scale)
        .ok()
        .filter(|_| scale > 0.0)
        .ok_or_else(|| Error::InvalidConfig(format!("init scale {scale} must be > 0")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = Array2::from_shape_simple_fn((num_nodes, dim), || T::of(normal.sample(&mut rng)));
    Ok(EmbeddingMatrix::new(values))
}

/// Early-stopping signal computed from the scoring representation.
pub trait Validator<T>: Sync {
    fn validate(&self, representation: &Array2<T>) -> Result<f64>;
}

/// Adapts a closure into a [`Validator`].
pub struct FnValidator<F>(pub F);

impl<T, F> Validator<T> for FnValidator<F>
where
    F: Fn(&Array2<T>) -> f64 + Sync,
{
    fn validate(&self, representation: &Array2<T>) -> Result<f64> {
        Ok((self.0)(representation))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Loss at the iterate the epoch started from.
    pub loss: f64,
    /// Mean of `K₊` for the kernel applied during this epoch.
    pub mean_k_plus: f64,
    /// `‖X‖_F` after the update.
    pub frob_norm: f64,
    pub validation: Option<f64>,
    pub substeps: Option<[f64; 4]>,
    /// Whether substeps (1) and (3) did not lengthen their inputs.
    pub contracting: Option<bool>,
    /// Max-abs gap between the gradient and kernel trajectories.
    pub divergence: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStopped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    pub stop_epoch: usize,
    pub stop_reason: StopReason,
    pub best_epoch: Option<usize>,
    pub best_metric: Option<f64>,
    pub max_divergence: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Best-validation snapshot, or the final iterate without a validator.
    pub embeddings: EmbeddingMatrix<T>,
    /// `X̄` of the returned embeddings; what items are scored with.
    pub representation: Array2<T>,
    pub history: TrainHistory,
}

struct Machinery<T> {
    objective: Objective<T>,
    engine: KernelEngine<T>,
}

impl<T: Scalar> Machinery<T> {
    fn build(graph: &Graph, negatives: &NegativeSet, config: &TrainConfig) -> Result<Self> {
        let drop_tol = T::of(config.drop_tol);
        Ok(Self {
            objective: Objective::with_drop_tol(graph, negatives, config.loss_params(), drop_tol)?,
            engine: KernelEngine::with_drop_tol(&config.kernel_config()?, graph, negatives, drop_tol)?,
        })
    }
}

pub fn train<T: Scalar>(
    graph: &Graph,
    negatives: &NegativeSet,
    config: &TrainConfig,
    validator: Option<&dyn Validator<T>>,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    let alpha = T::of(config.alpha);
    let mut machinery = Machinery::<T>::build(graph, negatives, config)?;
    let mut x = init_embeddings::<T>(graph.num_nodes(), config.dim, config.init_scale, config.init_seed)?;
    let mut x_kernel = (config.path == TrainPath::Both).then(|| x.clone());

    let mut records = Vec::new();
    let mut best: Option<(f64, usize, EmbeddingMatrix<T>)> = None;
    let mut stale = 0usize;
    let mut stop_reason = StopReason::MaxEpochs;
    let mut max_divergence: Option<f64> = None;

    for epoch in 1..=config.max_epochs {
        if config.resample_negatives && epoch > 1 {
            let fresh = sample_negatives(
                graph,
                negatives.strategy(),
                negatives.ratio(),
                negatives.seed().wrapping_add(epoch as u64),
            )?;
            machinery = Machinery::build(graph, &fresh, config)?;
        }
        let Machinery { objective, engine } = &machinery;
        let loss = objective.loss(&x)?.to_f64_lossy();

        let traced = if config.trace_substeps || config.path == TrainPath::Kernel {
            Some(engine.step(&x, config.trace_substeps)?)
        } else {
            None
        };
        let next = match config.path {
            TrainPath::Kernel => traced.as_ref().expect("kernel step computed").x.clone(),
            _ => gd_step(&x, &objective.gradient(&x)?, alpha)?,
        };
        let kernels = match &traced {
            Some(step) => step.kernels.clone(),
            None => engine.link_kernels(&engine.scores(&x)?)?,
        };
        let (substeps, contracting) = match traced.as_ref().and_then(|s| s.trace.as_ref()) {
            Some(trace) => {
                let check = substep_trace(trace)?;
                (Some(check.norms), Some(check.contracting))
            }
            None => (None, None),
        };
        let divergence = match x_kernel.as_mut() {
            Some(xk) => {
                *xk = engine.step(xk, false)?.x;
                let d = max_abs_diff(next.values(), xk.values()).to_f64_lossy();
                max_divergence = Some(max_divergence.map_or(d, |m: f64| m.max(d)));
                Some(d)
            }
            None => None,
        };

        x = next;
        if !x.is_finite() {
            return Err(Error::Divergence { step: epoch });
        }

        let mut validation = None;
        let mut stop = false;
        if let Some(v) = validator {
            if epoch % config.eval_every == 0 {
                let metric = v.validate(&objective.representation(x.values())?)?;
                validation = Some(metric);
                let improved = best.as_ref().is_none_or(|(m, _, _)| metric > *m);
                if improved {
                    best = Some((metric, epoch, x.clone()));
                    stale = 0;
                } else {
                    stale += 1;
                    stop = stale >= config.patience;
                }
            }
        }

        records.push(EpochRecord {
            epoch,
            loss,
            mean_k_plus: mean_positive_kernel(&kernels)?,
            frob_norm: x.frobenius().to_f64_lossy(),
            validation,
            substeps,
            contracting,
            divergence,
        });
        if stop {
            stop_reason = StopReason::EarlyStopped;
            break;
        }
    }

    let stop_epoch = records.last().map_or(0, |r| r.epoch);
    let (best_metric, best_epoch, embeddings) = match best {
        Some((m, e, snapshot)) => (Some(m), Some(e), snapshot),
        None => (None, None, x),
    };
    let representation = machinery.objective.representation(embeddings.values())?;
    Ok(TrainOutcome {
        embeddings,
        representation,
        history: TrainHistory {
            records,
            stop_epoch,
            stop_reason,
            best_epoch,
            best_metric,
            max_divergence,
        },
    })
}

/// Agreement between the gradient and kernel routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathComparison {
    pub steps: usize,
    /// Largest one-step gap, both routes started from the same iterate.
    pub max_step_deviation: f64,
    /// Gap between the two independent trajectories after the last step.
    pub final_deviation: f64,
    /// Largest trajectory gap over all steps.
    pub max_trajectory_deviation: f64,
}

/// Runs gradient descent and kernel propagation side by side for `steps`
/// steps from `x0`.
pub fn compare_paths<T: Scalar>(
    graph: &Graph,
    negatives: &NegativeSet,
    config: &TrainConfig,
    x0: &EmbeddingMatrix<T>,
    steps: usize,
) -> Result<PathComparison> {
    let Machinery { objective, engine } = Machinery::<T>::build(graph, negatives, config)?;
    let alpha = T::of(config.alpha);
    let mut x_grad = x0.clone();
    let mut x_kernel = x0.clone();
    let mut out = PathComparison {
        steps,
        max_step_deviation: 0.0,
        final_deviation: 0.0,
        max_trajectory_deviation: 0.0,
    };
    for _ in 0..steps {
        let from_grad = gd_step(&x_grad, &objective.gradient(&x_grad)?, alpha)?;
        let kernel_from_same = engine.step(&x_grad, false)?.x;
        out.max_step_deviation = out
            .max_step_deviation
            .max(from_grad.max_abs_diff(&kernel_from_same).to_f64_lossy());
        x_kernel = engine.step(&x_kernel, false)?.x;
        x_grad = from_grad;
        out.final_deviation = x_grad.max_abs_diff(&x_kernel).to_f64_lossy();
        out.max_trajectory_deviation = out.max_trajectory_deviation.max(out.final_deviation);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub alphas: Vec<f64>,
    /// Only used for LightGCN.
    pub layers: Vec<usize>,
}

impl Grid {
    /// Learning rates `1e-5 .. 1e-1` and LightGCN depths `{1, 3, 5}`.
    pub fn standard() -> Self {
        Self {
            alphas: vec![1e-5, 1e-4, 1e-3, 1e-2, 1e-1],
            layers: vec![1, 3, 5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PointStatus {
    Completed {
        best_metric: f64,
        best_epoch: usize,
        stop_epoch: usize,
    },
    Divergent {
        epoch: usize,
    },
    Failed {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub alpha: f64,
    pub layers: Option<usize>,
    #[serde(flatten)]
    pub status: PointStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub best: TrainConfig,
    pub best_metric: f64,
    pub points: Vec<GridPoint>,
}

/// Trains every grid point (in parallel) and keeps the best validation
/// metric; ties go to the smaller learning rate, then fewer layers.
/// Diverging points are recorded and skipped.
pub fn grid_search<T: Scalar>(
    graph: &Graph,
    negatives: &NegativeSet,
    base: &TrainConfig,
    grid: &Grid,
    validator: &dyn Validator<T>,
) -> Result<GridSearch> {
    let mut alphas = grid.alphas.clone();
    alphas.sort_by(f64::total_cmp);
    let layer_options: Vec<Option<usize>> = match base.model {
        Model::LightGcn { .. } => {
            let mut l = grid.layers.clone();
            l.sort_unstable();
            l.into_iter().map(Some).collect()
        }
        _ => vec![None],
    };
    if alphas.is_empty() || layer_options.is_empty() {
        return Err(Error::InvalidConfig("empty grid".into()));
    }
    let configs: Vec<TrainConfig> = alphas
        .iter()
        .flat_map(|&alpha| {
            layer_options.iter().map(move |&layers| TrainConfig {
                alpha,
                model: layers.map_or(base.model, |layers| Model::LightGcn { layers }),
                ..base.clone()
            })
        })
        .collect();

    let points: Vec<GridPoint> = configs
        .par_iter()
        .map(|cfg| {
            let status = match train::<T>(graph, negatives, cfg, Some(validator)) {
                Ok(out) => PointStatus::Completed {
                    best_metric: out.history.best_metric.unwrap_or(f64::NAN),
                    best_epoch: out.history.best_epoch.unwrap_or(out.history.stop_epoch),
                    stop_epoch: out.history.stop_epoch,
                },
                Err(Error::Divergence { step }) => PointStatus::Divergent { epoch: step },
                Err(e) => PointStatus::Failed {
                    message: e.to_string(),
                },
            };
            GridPoint {
                alpha: cfg.alpha,
                layers: match cfg.model {
                    Model::LightGcn { layers } => Some(layers),
                    _ => None,
                },
                status,
            }
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (i, p) in points.iter().enumerate() {
        if let PointStatus::Completed { best_metric, .. } = p.status {
            if best_metric.is_finite() && best.is_none_or(|(_, m)| best_metric > m) {
                best = Some((i, best_metric));
            }
        }
    }
    let (idx, best_metric) = best.ok_or(Error::AllDivergent)?;
    Ok(GridSearch {
        best: configs[idx].clone(),
        best_metric,
        points,
    })
}
