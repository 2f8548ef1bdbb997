//! End-to-end runs: ingest, split, sample, tune, train, evaluate, emit.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::diagnostics::emit_trajectories;
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalTarget, RecallValidator};
use crate::graph::Graph;
use crate::io::config::RunConfig;
use crate::io::dataset::{dataset_checksum, load_edge_list, verify_stats, Dataset};
use crate::io::report::{
    DatasetSection, MeanMetrics, ModelReport, Report, RunRow, SplitSummary, Verification, SCHEMA_VERSION,
};
use crate::io::split::split_dataset;
use crate::negative::sample_negatives;
use crate::objectives::Model;
use crate::trainer::{grid_search, train, TrainConfig};

pub const REPORT_FILE: &str = "report.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const FAILED_MARKER: &str = "FAILED";

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: Report,
    pub dir: PathBuf,
}

fn model_slug(model: &Model) -> String {
    model.to_string().replace(':', "-")
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs the whole protocol described by `config` and writes the report,
/// metrics CSV, text summary and trajectory CSVs to `config.output.dir`.
/// On failure a `FAILED` file with the stage-tagged error is left there
/// instead of a report.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentOutput> {
    let dir = config.output.dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for stale in [REPORT_FILE, METRICS_FILE, SUMMARY_FILE, FAILED_MARKER] {
        let _ = std::fs::remove_file(dir.join(stale));
    }
    match run_stages(config, &dir) {
        Ok(report) => Ok(ExperimentOutput { report, dir }),
        Err(e) => {
            let _ = std::fs::write(dir.join(FAILED_MARKER), format!("{e}\n"));
            Err(e)
        }
    }
}

fn run_stages(config: &RunConfig, dir: &Path) -> Result<Report> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let models = config.models().map_err(|e| e.in_stage("config"))?;

    let dataset = load_edge_list(&config.data.path, config.data.format).map_err(|e| e.in_stage("ingest"))?;
    let verification = config.data.expected.map(|expected| match verify_stats(&dataset.graph, &expected) {
        Ok(_) => Verification {
            expected,
            passed: true,
            detail: None,
        },
        Err(e) => Verification {
            expected,
            passed: false,
            detail: Some(e.to_string()),
        },
    });

    let splits = split_dataset(&dataset.graph, config.split.ratios, config.split.seed)
        .map_err(|e| e.in_stage("split"))?;
    let train_graph = splits.train_graph().map_err(|e| e.in_stage("split"))?;
    let (n_train, n_val, n_test) = splits.counts();

    if config.output.trajectories {
        let tdir = dir.join("trajectories");
        std::fs::create_dir_all(&tdir).map_err(|e| Error::io(&tdir, e).in_stage("emit"))?;
    }

    let name = config.dataset_name();
    let mut model_reports = Vec::with_capacity(models.len());
    for model in models {
        model_reports.push(run_model(config, &name, model, &train_graph, &splits, dir)?);
    }

    let report = Report {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        threads: rayon::current_num_threads(),
        dataset: dataset_section(config, &name, &dataset, verification),
        split: SplitSummary {
            ratios: splits.ratios,
            seed: splits.seed,
            train: n_train,
            validation: n_val,
            test: n_test,
            flagged_users: splits.flagged_users.len(),
        },
        k: config.eval.k,
        models: model_reports,
        config: config.clone(),
    };
    let emit = || -> Result<()> {
        report.validate(Some(dir))?;
        write(&dir.join(REPORT_FILE), &report.to_json())?;
        write(&dir.join(METRICS_FILE), &report.metrics_csv())?;
        write(&dir.join(SUMMARY_FILE), &report.table())
    };
    emit().map_err(|e| e.in_stage("emit"))?;
    Ok(report)
}

fn dataset_section(
    config: &RunConfig,
    name: &str,
    dataset: &Dataset,
    verification: Option<Verification>,
) -> DatasetSection {
    DatasetSection {
        name: name.to_string(),
        path: config.data.path.display().to_string(),
        sha256: dataset_checksum(dataset),
        stats: dataset.stats(),
        verification,
    }
}

fn run_model(
    config: &RunConfig,
    dataset_name: &str,
    model: Model,
    train_graph: &Graph,
    splits: &crate::eval::SplitSet,
    dir: &Path,
) -> Result<ModelReport> {
    let strategy = config.sampling.strategy_for(model);
    let validator = RecallValidator {
        train: train_graph,
        splits,
        k: config.eval.k,
    };

    let mut chosen: TrainConfig = config.train_config(model, 0);
    let grid = if config.grid.enabled {
        let neg = sample_negatives(train_graph, strategy, config.sampling.ratio, config.sampling.seed)
            .map_err(|e| e.in_stage("sample"))?;
        let search = grid_search::<f64>(train_graph, &neg, &chosen, &config.grid(), &validator)
            .map_err(|e| e.in_stage("grid"))?;
        chosen = search.best.clone();
        Some(search)
    } else {
        None
    };

    let runs = (0..config.run.repetitions)
        .into_par_iter()
        .map(|r| -> Result<RunRow> {
            let negative_seed = config.sampling.seed.wrapping_add(r as u64);
            let neg = sample_negatives(train_graph, strategy, config.sampling.ratio, negative_seed)
                .map_err(|e| e.in_stage("sample"))?;
            let cfg = TrainConfig {
                init_seed: config.train.seed.wrapping_add(r as u64),
                ..chosen.clone()
            };
            let out = train::<f64>(train_graph, &neg, &cfg, Some(&validator)).map_err(|e| e.in_stage("train"))?;
            let test = evaluate(&out.representation, train_graph, splits, EvalTarget::Test, config.eval.k)
                .map_err(|e| e.in_stage("evaluate"))?;
            let trajectory = if config.output.trajectories {
                let rel = format!("trajectories/{dataset_name}_{}_r{r}.csv", model_slug(&model));
                emit_trajectories(&out.history, &dir.join(&rel)).map_err(|e| e.in_stage("emit"))?;
                Some(rel)
            } else {
                None
            };
            Ok(RunRow {
                repetition: r,
                init_seed: cfg.init_seed,
                negative_seed,
                negatives: neg.len(),
                stop_epoch: out.history.stop_epoch,
                stop_reason: out.history.stop_reason,
                best_epoch: out.history.best_epoch,
                best_validation: out.history.best_metric,
                test,
                trajectory,
                max_divergence: out.history.max_divergence,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ModelReport {
        model: model.to_string(),
        grid,
        chosen,
        mean: MeanMetrics::of(&runs),
        runs,
    })
}
