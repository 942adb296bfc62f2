//! Command-line frontend for the ckdnet toolkit.
//!
//! Four subcommands cover the whole pipeline: `gen` writes a synthetic
//! screening dataset, `train` fits the classifier and records its learning
//! curves, `eval` scores a trained model (or a raw score file) against
//! labeled data, and `importance` ranks features by permutation importance.
//!
//! Every subcommand accepts `--config FILE` with `key=value` lines as a
//! source of defaults; explicit flags always win. Exit codes: 0 on success,
//! 1 for runtime or data errors, 2 for usage errors.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use ckdnet::data::{load_csv, DataSchema, Dataset, SplitSpec, Standardizer, FEATURE_COUNT};
use ckdnet::importance::{permutation_importance_with, Scoring};
use ckdnet::metrics::{full_report, MetricReport};
use ckdnet::nn::{train, MlpModel, TrainConfig};
use ckdnet::synth::{default_ckd_profile, generate};
use ckdnet::{Error as CoreError, Matrix};

#[derive(Parser)]
#[command(
    name = "ckdnet",
    about = "Train and evaluate a small neural network for kidney disease screening data",
    version
)]
struct Cli {
    /// Defaults file with key=value lines; explicit flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset
    Gen(GenArgs),
    /// Train a classifier and write model, sidecar, and learning curves
    Train(TrainArgs),
    /// Score a model or a score file against labeled data
    Eval(EvalArgs),
    /// Rank features by permutation importance
    Importance(ImportanceArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Output CSV path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of rows
    #[arg(long)]
    n: Option<usize>,
    /// Fraction of rows labeled ckd, strictly between 0 and 1
    #[arg(long)]
    ckd_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Probability that a feature cell is left blank, in [0, 1)
    #[arg(long)]
    missing_rate: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled input CSV
    #[arg(long)]
    data: Option<PathBuf>,
    /// Where to write the trained model
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Where to write per-epoch curves (default: curves.csv)
    #[arg(long)]
    curves_out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Hidden layer widths as "H1,H2"
    #[arg(long, value_parser = parse_hidden_dims)]
    hidden_dims: Option<(usize, usize)>,
    /// Seed for weight initialization and batch shuffling
    #[arg(long)]
    seed: Option<u64>,
    /// Fraction of rows used for training
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Seed for the train/test split
    #[arg(long)]
    split_seed: Option<u64>,
    /// Split without preserving the class ratio
    #[arg(long)]
    no_stratify: bool,
    /// Skip feature standardization
    #[arg(long)]
    no_standardize: bool,
    /// Decision threshold for the final held-out metrics
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SplitSide {
    None,
    Train,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ScoringArg {
    Accuracy,
    Loss,
}

#[derive(Args)]
struct EvalArgs {
    /// Labeled input CSV
    #[arg(long)]
    data: Option<PathBuf>,
    /// Where to write the metric report
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trained model file (alternative to --scores)
    #[arg(long)]
    model: Option<PathBuf>,
    /// Standardization sidecar (default: "<model>.stats")
    #[arg(long)]
    stats: Option<PathBuf>,
    /// File with one probability per line (alternative to --model)
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Decision threshold
    #[arg(long)]
    threshold: Option<f64>,
    /// Evaluate only one side of the train/test split: none, train, or test
    #[arg(long, value_parser = parse_split_side)]
    split: Option<SplitSide>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    no_stratify: bool,
}

#[derive(Args)]
struct ImportanceArgs {
    /// Labeled input CSV
    #[arg(long)]
    data: Option<PathBuf>,
    /// Trained model file
    #[arg(long)]
    model: Option<PathBuf>,
    /// Where to write the ranking CSV
    #[arg(long)]
    out: Option<PathBuf>,
    /// Standardization sidecar (default: "<model>.stats")
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Permutations per feature
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Degradation measure: accuracy or loss
    #[arg(long, value_parser = parse_scoring)]
    scoring: Option<ScoringArg>,
    /// Restrict to one side of the train/test split: none, train, or test
    #[arg(long, value_parser = parse_split_side)]
    split: Option<SplitSide>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    no_stratify: bool,
}

fn parse_hidden_dims(s: &str) -> Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected \"H1,H2\", got '{s}'"));
    }
    let h1 = parts[0]
        .trim()
        .parse::<usize>()
        .map_err(|_| format!("bad hidden width '{}'", parts[0]))?;
    let h2 = parts[1]
        .trim()
        .parse::<usize>()
        .map_err(|_| format!("bad hidden width '{}'", parts[1]))?;
    Ok((h1, h2))
}

fn parse_split_side(s: &str) -> Result<SplitSide, String> {
    match s {
        "none" => Ok(SplitSide::None),
        "train" => Ok(SplitSide::Train),
        "test" => Ok(SplitSide::Test),
        _ => Err(format!("expected none, train, or test, got '{s}'")),
    }
}

fn parse_scoring(s: &str) -> Result<ScoringArg, String> {
    match s {
        "accuracy" => Ok(ScoringArg::Accuracy),
        "loss" => Ok(ScoringArg::Loss),
        _ => Err(format!("expected accuracy or loss, got '{s}'")),
    }
}

enum CliError {
    /// Bad invocation: wrong flags, unusable values. Exit code 2.
    Usage(String),
    /// The pipeline itself failed: bad files, bad data. Exit code 1.
    Run(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Run(e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Keys accepted in a `--config` file; the single namespace is shared by
/// all subcommands, and each command reads only the keys it understands.
const KNOWN_KEYS: [&str; 23] = [
    "batch_size",
    "ckd_fraction",
    "curves_out",
    "data",
    "epochs",
    "hidden_dims",
    "learning_rate",
    "missing_rate",
    "model",
    "model_out",
    "n",
    "out",
    "repeats",
    "scores",
    "scoring",
    "seed",
    "split",
    "split_seed",
    "standardize",
    "stats",
    "stratified",
    "threshold",
    "train_fraction",
];

struct ConfigMap {
    values: HashMap<String, String>,
}

impl ConfigMap {
    fn empty() -> ConfigMap {
        ConfigMap {
            values: HashMap::new(),
        }
    }

    fn load(path: &Path) -> Result<ConfigMap, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("config file {}: {e}", path.display())))?;
        let mut values = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                usage(format!(
                    "config file {} line {}: expected key=value, got '{line}'",
                    path.display(),
                    i + 1
                ))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(usage(format!(
                    "config file {} line {}: unknown key '{key}'",
                    path.display(),
                    i + 1
                )));
            }
            if values.insert(key.to_string(), value.to_string()).is_some() {
                return Err(usage(format!(
                    "config file {} line {}: duplicate key '{key}'",
                    path.display(),
                    i + 1
                )));
            }
        }
        Ok(ConfigMap { values })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| usage(format!("config key '{key}': cannot parse '{raw}'"))),
        }
    }

    fn parse_with<T>(
        &self,
        key: &str,
        parser: fn(&str) -> Result<T, String>,
    ) -> Result<Option<T>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => parser(raw)
                .map(Some)
                .map_err(|e| usage(format!("config key '{key}': {e}"))),
        }
    }

    fn parse_bool(&self, key: &str) -> Result<Option<bool>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some("true") => Ok(Some(true)),
            Some("false") => Ok(Some(false)),
            Some(raw) => Err(usage(format!(
                "config key '{key}': expected true or false, got '{raw}'"
            ))),
        }
    }
}

/// Flag value if present, otherwise the config entry.
fn pick<T: FromStr>(
    flag: Option<T>,
    cfg: &ConfigMap,
    key: &str,
) -> Result<Option<T>, CliError> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.parse(key),
    }
}

fn pick_with<T>(
    flag: Option<T>,
    cfg: &ConfigMap,
    key: &str,
    parser: fn(&str) -> Result<T, String>,
) -> Result<Option<T>, CliError> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.parse_with(key, parser),
    }
}

fn require<T>(value: Option<T>, flag: &str, key: &str) -> Result<T, CliError> {
    value.ok_or_else(|| usage(format!("missing {flag} (or config key '{key}')")))
}

fn check_unit_interval(value: f64, what: &str) -> Result<(), CliError> {
    if !value.is_finite() || !(value > 0.0 && value < 1.0) {
        return Err(usage(format!(
            "{what} must lie strictly between 0 and 1, got {value}"
        )));
    }
    Ok(())
}

fn summary_line(report: &MetricReport) -> String {
    fn v(x: Option<f64>) -> String {
        x.map_or_else(|| "undefined".to_string(), |v| v.to_string())
    }
    format!(
        "accuracy={} sensitivity={} specificity={} precision={} recall={} f1={} cohen_kappa={} roc_auc={}",
        report.accuracy,
        v(report.sensitivity),
        v(report.specificity),
        v(report.precision),
        v(report.recall),
        v(report.f1),
        v(report.cohen_kappa),
        v(report.roc_auc),
    )
}

fn default_stats_path(model: &Path) -> PathBuf {
    PathBuf::from(format!("{}.stats", model.display()))
}

/// Rebuilds a dataset around transformed (fully observed) features.
fn with_features(ds: &Dataset, features: Matrix) -> Result<Dataset, CliError> {
    let mask = vec![false; ds.n_rows() * ds.schema().feature_count()];
    Ok(Dataset::new(
        ds.schema().clone(),
        features,
        ds.labels().to_vec(),
        mask,
    )?)
}

fn first_column(scores: &Matrix) -> Vec<f64> {
    scores.col_vec(0)
}

fn run_gen(args: GenArgs, cfg: &ConfigMap) -> Result<(), CliError> {
    let out = require(pick(args.out, cfg, "out")?, "--out", "out")?;
    let mut gen_cfg = default_ckd_profile();
    if let Some(n) = pick(args.n, cfg, "n")? {
        gen_cfg.n_rows = n;
    }
    if let Some(f) = pick(args.ckd_fraction, cfg, "ckd_fraction")? {
        gen_cfg.ckd_fraction = f;
    }
    if let Some(s) = pick(args.seed, cfg, "seed")? {
        gen_cfg.seed = s;
    }
    if let Some(m) = pick(args.missing_rate, cfg, "missing_rate")? {
        gen_cfg.missing_rate = m;
    }
    gen_cfg
        .validate()
        .map_err(|e| usage(e.to_string()))?;
    let ds = generate(&gen_cfg)?;
    ds.write_csv(&out)?;
    println!(
        "wrote {} rows ({} ckd / {} notckd, {} missing cells) to {}",
        ds.n_rows(),
        ds.positive_count(),
        ds.n_rows() - ds.positive_count(),
        ds.missing_count(),
        out.display()
    );
    Ok(())
}

struct SplitFlags {
    train_fraction: Option<f64>,
    split_seed: Option<u64>,
    no_stratify: bool,
}

fn resolve_split(flags: SplitFlags, cfg: &ConfigMap) -> Result<SplitSpec, CliError> {
    let train_fraction = pick(flags.train_fraction, cfg, "train_fraction")?.unwrap_or(0.7);
    check_unit_interval(train_fraction, "--train-fraction")?;
    let seed = pick(flags.split_seed, cfg, "split_seed")?.unwrap_or(0);
    let stratified = if flags.no_stratify {
        false
    } else {
        cfg.parse_bool("stratified")?.unwrap_or(true)
    };
    Ok(SplitSpec {
        train_fraction,
        seed,
        stratified,
    })
}

fn run_train(args: TrainArgs, cfg: &ConfigMap) -> Result<(), CliError> {
    let data_path = require(pick(args.data, cfg, "data")?, "--data", "data")?;
    let model_out = require(pick(args.model_out, cfg, "model_out")?, "--model-out", "model_out")?;
    let curves_out =
        pick(args.curves_out, cfg, "curves_out")?.unwrap_or_else(|| PathBuf::from("curves.csv"));

    let train_cfg = TrainConfig {
        epochs: pick(args.epochs, cfg, "epochs")?.unwrap_or(100),
        learning_rate: pick(args.learning_rate, cfg, "learning_rate")?.unwrap_or(0.01),
        batch_size: pick(args.batch_size, cfg, "batch_size")?.unwrap_or(32),
        hidden_dims: pick_with(args.hidden_dims, cfg, "hidden_dims", parse_hidden_dims)?
            .unwrap_or((32, 16)),
        seed: pick(args.seed, cfg, "seed")?.unwrap_or(0),
    };
    train_cfg.validate().map_err(|e| usage(e.to_string()))?;
    let split = resolve_split(
        SplitFlags {
            train_fraction: args.train_fraction,
            split_seed: args.split_seed,
            no_stratify: args.no_stratify,
        },
        cfg,
    )?;
    let standardize = if args.no_standardize {
        false
    } else {
        cfg.parse_bool("standardize")?.unwrap_or(true)
    };
    let threshold = pick(args.threshold, cfg, "threshold")?.unwrap_or(0.5);
    check_unit_interval(threshold, "--threshold")?;

    let raw = load_csv(&data_path, &DataSchema::ckd())?;
    let imputed = raw.impute_mean()?;
    let (train_raw, test_raw) = imputed.split(&split)?;
    let standardizer = if standardize {
        Standardizer::fit(train_raw.features())?
    } else {
        Standardizer::identity(FEATURE_COUNT)
    };
    let train_ds = with_features(&train_raw, standardizer.transform(train_raw.features())?)?;
    let test_ds = with_features(&test_raw, standardizer.transform(test_raw.features())?)?;

    let (model, log) = train(&train_ds, Some(&test_ds), &train_cfg)?;

    let stats_out = default_stats_path(&model_out);
    model.save(&model_out)?;
    standardizer.save(&stats_out)?;
    log.write_csv(&curves_out)?;

    let scores = first_column(&model.forward(test_ds.features())?);
    let (_, report) = full_report(&scores, threshold, test_ds.labels())?;

    println!(
        "trained on {} rows, held out {} rows",
        train_ds.n_rows(),
        test_ds.n_rows()
    );
    println!("model: {}", model_out.display());
    println!("stats: {}", stats_out.display());
    println!("curves: {}", curves_out.display());
    println!("final: {}", summary_line(&report));
    Ok(())
}

/// Loads, imputes, and (optionally) narrows the data to one split side.
fn load_side(
    data_path: &Path,
    side: SplitSide,
    split: &SplitSpec,
) -> Result<Dataset, CliError> {
    let raw = load_csv(data_path, &DataSchema::ckd())?;
    let imputed = raw.impute_mean()?;
    Ok(match side {
        SplitSide::None => imputed,
        SplitSide::Train => imputed.split(split)?.0,
        SplitSide::Test => imputed.split(split)?.1,
    })
}

fn load_standardizer(explicit: Option<PathBuf>, model_path: &Path) -> Result<Standardizer, CliError> {
    let path = explicit.unwrap_or_else(|| default_stats_path(model_path));
    Standardizer::load(&path).map_err(|e| match e {
        CoreError::Io { .. } => CliError::Run(format!(
            "{e}; the sidecar is written by `ckdnet train` next to the model, or point --stats at it"
        )),
        other => other.into(),
    })
}

fn read_scores_file(path: &Path) -> Result<Vec<f64>, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Run(format!("{}: {e}", path.display())))?;
    let mut scores = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let value: f64 = line.parse().map_err(|_| {
            CliError::Run(format!(
                "{} line {}: not a number: '{line}'",
                path.display(),
                i + 1
            ))
        })?;
        scores.push(value);
    }
    if scores.is_empty() {
        return Err(CliError::Run(format!(
            "{}: no scores found",
            path.display()
        )));
    }
    Ok(scores)
}

enum ScoreSource {
    Model(PathBuf),
    File(PathBuf),
}

fn run_eval(args: EvalArgs, cfg: &ConfigMap) -> Result<(), CliError> {
    let data_path = require(pick(args.data, cfg, "data")?, "--data", "data")?;
    let out_path = require(pick(args.out, cfg, "out")?, "--out", "out")?;
    let model_path = pick(args.model, cfg, "model")?;
    let scores_path = pick(args.scores, cfg, "scores")?;
    let threshold = pick(args.threshold, cfg, "threshold")?.unwrap_or(0.5);
    check_unit_interval(threshold, "--threshold")?;
    let side = pick_with(args.split, cfg, "split", parse_split_side)?.unwrap_or(SplitSide::None);
    let split = resolve_split(
        SplitFlags {
            train_fraction: args.train_fraction,
            split_seed: args.split_seed,
            no_stratify: args.no_stratify,
        },
        cfg,
    )?;

    let source = match (model_path, scores_path) {
        (Some(model), None) => ScoreSource::Model(model),
        (None, Some(scores)) => ScoreSource::File(scores),
        _ => return Err(usage("pass exactly one of --model or --scores")),
    };

    let ds = load_side(&data_path, side, &split)?;
    let scores = match source {
        ScoreSource::Model(model_path) => {
            let model = MlpModel::load(&model_path)?;
            let standardizer = load_standardizer(args.stats, &model_path)?;
            let x = standardizer.transform(ds.features())?;
            first_column(&model.forward(&x)?)
        }
        ScoreSource::File(scores_path) => {
            let scores = read_scores_file(&scores_path)?;
            if scores.len() != ds.n_rows() {
                return Err(CliError::Run(format!(
                    "{}: {} scores for {} rows",
                    scores_path.display(),
                    scores.len(),
                    ds.n_rows()
                )));
            }
            scores
        }
    };

    let (counts, report) = full_report(&scores, threshold, ds.labels())?;
    let mut text = report.to_string();
    text.push('\n');
    text.push('\n');
    let _ = writeln!(text, "{counts}");
    std::fs::write(&out_path, &text)
        .map_err(|e| CliError::Run(format!("{}: {e}", out_path.display())))?;

    println!("evaluated {} rows", ds.n_rows());
    println!("final: {}", summary_line(&report));
    println!("{counts}");
    println!("report: {}", out_path.display());
    Ok(())
}

fn run_importance(args: ImportanceArgs, cfg: &ConfigMap) -> Result<(), CliError> {
    let data_path = require(pick(args.data, cfg, "data")?, "--data", "data")?;
    let model_path = require(pick(args.model, cfg, "model")?, "--model", "model")?;
    let out_path = require(pick(args.out, cfg, "out")?, "--out", "out")?;
    let repeats = pick(args.repeats, cfg, "repeats")?.unwrap_or(10);
    if repeats == 0 {
        return Err(usage("--repeats must be at least 1"));
    }
    let seed = pick(args.seed, cfg, "seed")?.unwrap_or(0);
    let scoring = match pick_with(args.scoring, cfg, "scoring", parse_scoring)?
        .unwrap_or(ScoringArg::Accuracy)
    {
        ScoringArg::Accuracy => Scoring::AccuracyDrop,
        ScoringArg::Loss => Scoring::LossIncrease,
    };
    let side = pick_with(args.split, cfg, "split", parse_split_side)?.unwrap_or(SplitSide::None);
    let split = resolve_split(
        SplitFlags {
            train_fraction: args.train_fraction,
            split_seed: args.split_seed,
            no_stratify: args.no_stratify,
        },
        cfg,
    )?;

    let ds = load_side(&data_path, side, &split)?;
    let model = MlpModel::load(&model_path)?;
    let standardizer = load_standardizer(args.stats, &model_path)?;
    let standardized = with_features(&ds, standardizer.transform(ds.features())?)?;

    let report = permutation_importance_with(&model, &standardized, repeats, seed, scoring)?;
    report.write_csv(&out_path)?;

    let baseline_name = match scoring {
        Scoring::AccuracyDrop => "baseline accuracy",
        Scoring::LossIncrease => "baseline loss",
    };
    println!("{baseline_name}: {}", report.baseline);
    let ranking = report.ranking();
    println!("top features: {}", ranking[..2.min(ranking.len())].join(", "));
    println!("ranking: {}", out_path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => ConfigMap::load(path)?,
        None => ConfigMap::empty(),
    };
    match cli.command {
        Command::Gen(args) => run_gen(args, &cfg),
        Command::Train(args) => run_train(args, &cfg),
        Command::Eval(args) => run_eval(args, &cfg),
        Command::Importance(args) => run_importance(args, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
