use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use unilink::eval::{evaluate, EvalTarget, RecallValidator};
use unilink::io::artifact::{load_json, save_json, ModelArtifact, SplitArtifact};
use unilink::io::config::{parse_override, RunConfig};
use unilink::io::dataset::{canonical_form, load_edge_list, stats, verify_stats, EdgeFormat, ExpectedStats};
use unilink::io::experiment::{run_experiment, REPORT_FILE};
use unilink::io::split::split_dataset;
use unilink::io::{Dataset, Report};
use unilink::negative::sample_negatives;
use unilink::synth::{community_bipartite, random_graph, CommunitySpec};
use unilink::trainer::{compare_paths, init_embeddings, train, TrainConfig};
use unilink::{Graph, Model};

/// Link prediction with MF, LINE, DeepWalk and LightGCN, trained by gradient
/// descent or by propagation kernels.
///
/// Environment:
///   UNILINK_OUT_DIR   output directory for `run` (overrides output.dir)
///   UNILINK_THREADS   worker threads (overrides run.threads)
#[derive(Parser)]
#[command(name = "unilink", version, verbatim_doc_comment)]
struct Cli {
    /// Worker threads.
    #[arg(long, global = true, env = "UNILINK_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an edge list, print its statistics and write the canonical form.
    Ingest(IngestArgs),
    /// Split a dataset per user into train/validation/test.
    Split(SplitArgs),
    /// Train one model on a split.
    Train(TrainArgs),
    /// Score a trained model on a split.
    Evaluate(EvaluateArgs),
    /// Compare the gradient and kernel trajectories.
    VerifyEquivalence(EquivalenceArgs),
    /// Validate a report and print its table.
    Report(ReportArgs),
    /// Run a full experiment from a config file.
    Run(RunArgs),
    /// Write one of the bundled synthetic datasets.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Known {
    Elect,
    Lastfm,
}

#[derive(Args)]
struct IngestArgs {
    input: PathBuf,
    #[arg(long, default_value = "auto")]
    format: String,
    /// Canonical output file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Certify against published statistics.
    #[arg(long, value_enum)]
    expect: Option<Known>,
}

#[derive(Args)]
struct SplitArgs {
    input: PathBuf,
    #[arg(long, default_value = "auto")]
    format: String,
    /// Train, validation and test fractions.
    #[arg(long, value_delimiter = ',', default_value = "0.8,0.1,0.1")]
    ratios: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Config-file settings shared by `train` and `run`.
#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set train.alpha=0.01`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let overrides = self
            .overrides
            .iter()
            .map(|o| parse_override(o))
            .collect::<unilink::Result<Vec<_>>>()?;
        Ok(match &self.config {
            Some(path) => RunConfig::load(path, &overrides)?,
            None => RunConfig::from_toml_with("", &overrides)?,
        })
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Split artifact written by `split`.
    #[arg(long)]
    split: PathBuf,
    #[arg(long)]
    model: String,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    split: PathBuf,
    /// Model artifact written by `train`.
    #[arg(long)]
    model_file: PathBuf,
    #[arg(long, default_value_t = 20)]
    k: usize,
    /// Score the validation lists instead of the test lists.
    #[arg(long)]
    validation: bool,
}

#[derive(Args)]
struct EquivalenceArgs {
    /// Model(s) to check; defaults to all four.
    #[arg(long)]
    model: Vec<String>,
    /// Edge list to use instead of a random graph.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    nodes: usize,
    #[arg(long, default_value_t = 0.25)]
    edge_prob: f64,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 50)]
    steps: usize,
    #[arg(long, default_value_t = 1e-2)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest acceptable one-step deviation.
    #[arg(long, default_value_t = 1e-8)]
    step_tol: f64,
    /// Largest acceptable trajectory deviation.
    #[arg(long, default_value_t = 1e-6)]
    total_tol: f64,
}

#[derive(Args)]
struct ReportArgs {
    /// A report file or the directory containing it.
    path: PathBuf,
    /// Print the metrics CSV instead of the table.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, env = "UNILINK_OUT_DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Toy50,
    Synth200,
    Synth500,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(value_enum)]
    preset: Preset,
    #[arg(long)]
    out: PathBuf,
}

fn format_of(s: &str) -> Result<EdgeFormat> {
    Ok(s.parse::<EdgeFormat>()?)
}

fn ingest(args: &IngestArgs) -> Result<bool> {
    let dataset = load_edge_list(&args.input, format_of(&args.format)?)?;
    let s = stats(&dataset.graph);
    println!(
        "users {}  items {}  nodes {}  links {}  density {:.4}%",
        dataset.users.len(),
        dataset.items.len(),
        s.nodes,
        s.links,
        100.0 * s.density
    );
    if let Some(out) = &args.out {
        std::fs::write(out, canonical_form(&dataset)).with_context(|| format!("writing {}", out.display()))?;
    }
    if let Some(known) = args.expect {
        let expected = match known {
            Known::Elect => ExpectedStats::ELECT,
            Known::Lastfm => ExpectedStats::LASTFM,
        };
        match verify_stats(&dataset.graph, &expected) {
            Ok(_) => println!("statistics check: pass"),
            Err(e) => {
                println!("statistics check: FAIL ({e})");
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn split(args: &SplitArgs) -> Result<()> {
    let ratios: [f64; 3] = args
        .ratios
        .as_slice()
        .try_into()
        .context("--ratios takes exactly three values")?;
    let dataset = load_edge_list(&args.input, format_of(&args.format)?)?;
    let splits = split_dataset(&dataset.graph, ratios, args.seed)?;
    let (tr, va, te) = splits.counts();
    println!(
        "train {tr}  validation {va}  test {te}  users without test items {}",
        splits.flagged_users.len()
    );
    let name = args
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    save_json(&SplitArtifact::new(&name, &dataset, splits), &args.out)?;
    Ok(())
}

fn train_cmd(args: &TrainArgs) -> Result<()> {
    let cfg = args.config.load()?;
    let model: Model = args.model.parse()?;
    let artifact: SplitArtifact = load_json(&args.split)?;
    let train_graph = artifact.splits.train_graph()?;
    let tc = cfg.train_config(model, 0);
    tc.validate()?;
    let neg = sample_negatives(
        &train_graph,
        cfg.sampling.strategy_for(model),
        cfg.sampling.ratio,
        cfg.sampling.seed,
    )?;
    let validator = RecallValidator {
        train: &train_graph,
        splits: &artifact.splits,
        k: cfg.eval.k,
    };
    let out = train::<f64>(&train_graph, &neg, &tc, Some(&validator))?;
    println!(
        "{model}: stopped at epoch {} ({:?}), best validation recall@{} {:.4} at epoch {}",
        out.history.stop_epoch,
        out.history.stop_reason,
        cfg.eval.k,
        out.history.best_metric.unwrap_or(f64::NAN),
        out.history.best_epoch.unwrap_or(0)
    );
    if let Some(d) = out.history.max_divergence {
        println!("max gradient/kernel divergence {d:.3e}");
    }
    save_json(
        &ModelArtifact {
            config: tc,
            negative_seed: cfg.sampling.seed,
            representation: ModelArtifact::rows_of(&out.representation),
            history: out.history,
        },
        &args.out,
    )?;
    Ok(())
}

fn evaluate_cmd(args: &EvaluateArgs) -> Result<()> {
    let artifact: SplitArtifact = load_json(&args.split)?;
    let model: ModelArtifact = load_json(&args.model_file)?;
    let train_graph = artifact.splits.train_graph()?;
    let target = if args.validation {
        EvalTarget::Validation
    } else {
        EvalTarget::Test
    };
    let result = evaluate(&model.representation()?, &train_graph, &artifact.splits, target, args.k)?;
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}

fn equivalence_graph(args: &EquivalenceArgs) -> Result<Graph> {
    Ok(match &args.dataset {
        Some(path) => load_edge_list(path, EdgeFormat::Auto)?.graph,
        None => random_graph(args.nodes, args.edge_prob, args.seed)?,
    })
}

fn verify_equivalence(args: &EquivalenceArgs) -> Result<bool> {
    let graph = equivalence_graph(args)?;
    let names = if args.model.is_empty() {
        vec!["mf".to_string(), "line".into(), "deepwalk".into(), "lightgcn".into()]
    } else {
        args.model.clone()
    };
    let mut all_ok = true;
    println!("{:<12} {:>14} {:>14}", "model", "max step dev", "final dev");
    for name in names {
        let model: Model = name.parse()?;
        let cfg = TrainConfig {
            model,
            alpha: args.alpha,
            beta: args.beta,
            lambda: args.lambda,
            dim: args.dim,
            ..TrainConfig::default()
        };
        let neg = sample_negatives(&graph, unilink::SamplingStrategy::Uniform, 1, args.seed)?;
        let x0 = init_embeddings::<f64>(graph.num_nodes(), args.dim, 0.1, args.seed)?;
        let cmp = compare_paths(&graph, &neg, &cfg, &x0, args.steps)?;
        let ok = cmp.max_step_deviation < args.step_tol && cmp.max_trajectory_deviation < args.total_tol;
        all_ok &= ok;
        println!(
            "{:<12} {:>14.3e} {:>14.3e}  {}",
            model.to_string(),
            cmp.max_step_deviation,
            cmp.max_trajectory_deviation,
            if ok { "ok" } else { "FAIL" }
        );
    }
    Ok(all_ok)
}

fn report_cmd(args: &ReportArgs) -> Result<()> {
    let path = if args.path.is_dir() {
        args.path.join(REPORT_FILE)
    } else {
        args.path.clone()
    };
    let report = Report::load(&path)?;
    report.validate(path.parent())?;
    if args.csv {
        print!("{}", report.metrics_csv());
    } else {
        print!("{}", report.table());
    }
    Ok(())
}

fn run_cmd(args: &RunArgs, threads: Option<usize>) -> Result<()> {
    let mut cfg = args.config.load()?;
    if let Some(dir) = &args.out_dir {
        cfg.output.dir = dir.clone();
    }
    if threads.is_some() {
        cfg.run.threads = threads;
    }
    let out = run_experiment(&cfg)?;
    print!("{}", out.report.table());
    println!("report written to {}", out.dir.join(REPORT_FILE).display());
    Ok(())
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let spec = match args.preset {
        Preset::Toy50 => CommunitySpec::toy50(),
        Preset::Synth200 => CommunitySpec::synth200(),
        Preset::Synth500 => CommunitySpec::synth500(),
    };
    let graph = community_bipartite(&spec)?;
    let nu = spec.num_users;
    let names: Vec<(String, String)> = graph
        .edges()
        .iter()
        .map(|&(u, v)| (format!("u{u:04}"), format!("i{:04}", v - nu)))
        .collect();
    let dataset = Dataset::from_id_pairs(names.iter().map(|(u, i)| (u.as_str(), i.as_str())))?;
    write_text(&args.out, &canonical_form(&dataset))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn threads_from_config(cli: &Cli) -> Option<usize> {
    if cli.threads.is_some() {
        return cli.threads;
    }
    let Command::Run(args) = &cli.command else {
        return None;
    };
    args.config.load().ok().and_then(|c| c.run.threads)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = threads_from_config(&cli);
    if let Some(n) = threads {
        if n == 0 {
            eprintln!("error: thread count must be >= 1");
            return ExitCode::FAILURE;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let outcome = match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Split(a) => split(a).map(|_| true),
        Command::Train(a) => train_cmd(a).map(|_| true),
        Command::Evaluate(a) => evaluate_cmd(a).map(|_| true),
        Command::VerifyEquivalence(a) => verify_equivalence(a),
        Command::Report(a) => report_cmd(a).map(|_| true),
        Command::Run(a) => run_cmd(a, threads).map(|_| true),
        Command::Generate(a) => generate(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn ratios_must_have_three_parts() {
        let args = SplitArgs {
            input: PathBuf::from("missing"),
            format: "auto".into(),
            ratios: vec![0.5, 0.5],
            seed: 0,
            out: PathBuf::from("x"),
        };
        assert!(split(&args).is_err());
    }
}
