//! The `mcnpower` command line: dataset generation and labeling, exact and
//! sampled power indices, regressor training and evaluation, graph reports,
//! and a config-driven pipeline chaining them.
//!
//! Exit status is 0 on success, 1 for data errors and 2 for usage errors.
//! Failures print one JSON object on a single stderr line.

pub mod pipeline;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mcnpower::datagen::{self, GenMethod, GenSpec, LabeledDataset, WeightScheme};
use mcnpower::exact::exact_index;
use mcnpower::graph::correlation_report;
use mcnpower::mc::{hoeffding_samples, mc_index};
use mcnpower::nn::{self, TrainConfig};
use mcnpower::rng::derive_seed;
use mcnpower::{io, Error, IndexKind, McConfig, RuleSetDoc};

pub use pipeline::{run_pipeline, PipelineConfig, PipelineSummary};

pub const WORKERS_ENV: &str = "MCNPOWER_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "mcnpower", version, about = "Power indices for marginal contribution network games")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic rule-set dataset.
    Gen(GenArgs),
    /// Label a dataset in place with Monte-Carlo power indices.
    Label(LabelArgs),
    /// Split a dataset into train and test parts.
    Split(SplitArgs),
    /// Widen a dataset to more agent columns.
    Pad(PadArgs),
    /// Exact power indices of one rule set.
    Exact(ExactArgs),
    /// Monte-Carlo power indices of one rule set.
    Approx(ApproxArgs),
    /// Hoeffding sample size for a target accuracy.
    Samplesize(SamplesizeArgs),
    /// Train a regressor on a labeled dataset.
    Train(TrainArgs),
    /// Evaluate a trained model on a labeled dataset.
    Eval(EvalArgs),
    /// Correlate graph metrics with Banzhaf statistics.
    GraphStats(GraphStatsArgs),
    /// Run gen, label, split, train, eval and graph-stats from a config file.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    #[arg(long, default_value_t = 1)]
    pub c: usize,
    #[arg(long, default_value_t = datagen::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = datagen::DEFAULT_BETA)]
    pub beta: f64,
    #[arg(long, value_enum, default_value = "uniform")]
    pub weights: WeightsArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[arg(long, value_enum)]
    pub index: SampledIndex,
    #[arg(long, default_value_t = mcnpower::mc::DEFAULT_SAMPLES)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub workers: Option<usize>,
    pub dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long, default_value_t = 0.8)]
    pub ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    pub dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PadArgs {
    /// Target number of agent columns.
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub out: PathBuf,
    pub dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub index: ExactIndex,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ApproxArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub index: SampledIndex,
    #[arg(long, default_value_t = mcnpower::mc::DEFAULT_SAMPLES)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SamplesizeArgs {
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub delta: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 256)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GraphStatsArgs {
    /// Labeled dataset directory; repeat for several datasets.
    #[arg(long, required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the per-pair records as CSV.
    #[arg(long)]
    pub emit_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    pub config: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Uniform,
    Coinflip,
    Mog,
}

impl From<MethodArg> for GenMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Uniform => GenMethod::Uniform,
            MethodArg::Coinflip => GenMethod::Coinflip,
            MethodArg::Mog => GenMethod::Mog,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum WeightsArg {
    Uniform,
    GaussLow,
    GaussHigh,
}

impl From<WeightsArg> for WeightScheme {
    fn from(w: WeightsArg) -> Self {
        match w {
            WeightsArg::Uniform => WeightScheme::Uniform,
            WeightsArg::GaussLow => WeightScheme::GaussLow,
            WeightsArg::GaussHigh => WeightScheme::GaussHigh,
        }
    }
}

/// Indices with a Monte-Carlo estimator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampledIndex {
    Banzhaf,
    Shapley,
}

impl From<SampledIndex> for IndexKind {
    fn from(i: SampledIndex) -> Self {
        match i {
            SampledIndex::Banzhaf => IndexKind::BanzhafAlg4,
            SampledIndex::Shapley => IndexKind::ShapleyAlg5,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ExactIndex {
    BanzhafEq1,
    ShapleyEq2,
    BanzhafAlg4,
    ShapleyAlg5,
}

impl From<ExactIndex> for IndexKind {
    fn from(i: ExactIndex) -> Self {
        match i {
            ExactIndex::BanzhafEq1 => IndexKind::BanzhafEq1,
            ExactIndex::ShapleyEq2 => IndexKind::ShapleyEq2,
            ExactIndex::BanzhafAlg4 => IndexKind::BanzhafAlg4,
            ExactIndex::ShapleyAlg5 => IndexKind::ShapleyAlg5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Usage,
    Data,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub stage: Option<&'static str>,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Usage,
            stage: None,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Usage => 2,
            ErrorKind::Data => 1,
        }
    }

    /// The error as a single JSON line.
    pub fn to_json_line(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            error: ErrorKind,
            #[serde(skip_serializing_if = "Option::is_none")]
            stage: Option<&'a str>,
            message: &'a str,
        }
        serde_json::to_string(&Line {
            error: self.kind,
            stage: self.stage,
            message: &self.message,
        })
        .unwrap()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError {
            kind: ErrorKind::Data,
            stage: None,
            message: e.to_string(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.stage {
            Some(stage) => write!(f, "stage {stage}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Worker count: an explicit flag, else `MCNPOWER_WORKERS`, else 1.
pub fn resolve_workers(flag: Option<usize>) -> CliResult<usize> {
    let workers = match flag {
        Some(w) => w,
        None => match std::env::var(WORKERS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("{WORKERS_ENV}={v:?} is not a worker count")))?,
            Err(_) => 1,
        },
    };
    if workers == 0 {
        return Err(CliError::usage("worker count must be at least 1"));
    }
    Ok(workers)
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit status. Reports go to `out`, errors and usage text to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    if args.len() <= 1 {
        let mut cmd = <Cli as clap::CommandFactory>::command();
        let _ = writeln!(err, "{}", cmd.render_help());
        return 2;
    }
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as K;
            return match e.kind() {
                K::DisplayHelp | K::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let text = e.render().to_string();
                    let first = text.lines().next().unwrap_or("usage error");
                    let message = first.trim_start_matches("error: ").to_string();
                    let _ = writeln!(err, "{}", CliError::usage(message).to_json_line());
                    2
                }
            };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{}", e.to_json_line());
            e.exit_code()
        }
    }
}

fn emit<T: Serialize>(value: &T, path: Option<&Path>, out: &mut dyn Write) -> CliResult<()> {
    match path {
        Some(p) => io::write_json(p, value)?,
        None => {
            let s = serde_json::to_string_pretty(value).map_err(Error::from)?;
            writeln!(out, "{s}").map_err(|e| CliError::from(Error::InvalidArgument(format!("stdout: {e}"))))?;
        }
    }
    Ok(())
}

fn read_ruleset(path: &Path) -> CliResult<mcnpower::RuleSet> {
    let text = io::read(path)?;
    let text = String::from_utf8(text)
        .map_err(|_| Error::InvalidArgument(format!("{} is not UTF-8", path.display())))?;
    Ok(RuleSetDoc::from_json(&text)?.to_ruleset()?)
}

/// Report wrapper embedding the artifact format version and the hash of
/// the inputs it was computed from.
#[derive(Serialize)]
pub struct Stamped<T: Serialize> {
    pub format_version: u32,
    pub config_hash: String,
    #[serde(flatten)]
    pub report: T,
}

pub const REPORT_FORMAT_VERSION: u32 = 1;

pub fn stamp<T: Serialize, H: Serialize>(report: T, inputs: &H) -> Stamped<T> {
    Stamped {
        format_version: REPORT_FORMAT_VERSION,
        config_hash: io::config_hash(inputs),
        report,
    }
}

fn execute(command: Command, out: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::Gen(a) => {
            let spec = GenSpec {
                method: a.method.into(),
                k: a.k,
                n: a.n,
                m: a.m,
                p: a.p,
                c: a.c,
                alpha: a.alpha,
                beta: a.beta,
                weights: a.weights.into(),
                seed: a.seed,
            };
            let ds = generate_dataset(&spec)?;
            ds.save(&a.out)?;
            emit(&ds.meta, None, out)
        }
        Command::Label(a) => {
            let workers = resolve_workers(a.workers)?;
            let mut ds = LabeledDataset::load(&a.dir)?;
            ds.label(a.index.into(), a.samples, a.seed, workers)?;
            ds.save(&a.dir)?;
            emit(&ds.meta, None, out)
        }
        Command::Split(a) => {
            let ds = LabeledDataset::load(&a.dir)?;
            let (train, test) = datagen::split_dataset(&ds, a.ratio, a.seed)?;
            train.save(&a.train)?;
            test.save(&a.test)?;
            emit(&serde_json::json!({ "train": train.meta.k, "test": test.meta.k }), None, out)
        }
        Command::Pad(a) => {
            let ds = LabeledDataset::load(&a.dir)?;
            let padded = datagen::pad_dataset(&ds, a.m)?;
            padded.save(&a.out)?;
            emit(&padded.meta, None, out)
        }
        Command::Exact(a) => {
            let rs = read_ruleset(&a.input)?;
            let pv = exact_index(&rs, a.index.into())?;
            emit(&pv, a.out.as_deref(), out)
        }
        Command::Approx(a) => {
            let workers = resolve_workers(a.workers)?;
            let rs = read_ruleset(&a.input)?;
            let cfg = McConfig::new(a.samples, a.seed).with_workers(workers);
            let pv = mc_index(&rs, a.index.into(), &cfg)?;
            emit(&pv, a.out.as_deref(), out)
        }
        Command::Samplesize(a) => emit(&hoeffding_samples(a.epsilon, a.delta)?, None, out),
        Command::Train(a) => {
            let cfg = TrainConfig {
                epochs: a.epochs,
                batch_size: a.batch,
                learning_rate: a.lr,
                seed: a.seed,
                ..TrainConfig::default()
            };
            let ds = LabeledDataset::load(&a.data)?;
            let history = train_model(&ds, &cfg, &a.out)?;
            emit(&serde_json::json!({ "epochs": history.len(), "loss_history": history }), None, out)
        }
        Command::Eval(a) => {
            let ds = LabeledDataset::load(&a.data)?;
            let report = evaluate_model(&a.model, &ds)?;
            emit(&report, a.report.as_deref(), out)
        }
        Command::GraphStats(a) => {
            let datasets = a
                .data
                .iter()
                .map(|d| LabeledDataset::load(d))
                .collect::<Result<Vec<_>, _>>()?;
            graph_stats(&datasets, a.out.as_deref(), a.emit_csv.as_deref(), out)
        }
        Command::Pipeline(a) => {
            let text = io::read(&a.config)?;
            let cfg = PipelineConfig::from_json(&text)?;
            let summary = run_pipeline(&cfg, resolve_workers(None)?)?;
            emit(&summary, None, out)
        }
    }
}

pub fn generate_dataset(spec: &GenSpec) -> CliResult<LabeledDataset> {
    let games = datagen::generate(spec)?;
    Ok(LabeledDataset::encode(&games, Some(*spec))?)
}

/// Trains a fresh regressor sized to `ds` and saves it to `dir`.
pub fn train_model(ds: &LabeledDataset, cfg: &TrainConfig, dir: &Path) -> CliResult<Vec<f64>> {
    let x = ds.features();
    let y = ds.targets()?;
    let model = nn::init_model(x.ncols(), y.ncols(), derive_seed(cfg.seed, 2))?;
    let (model, history) = nn::train(model, x.view(), y.view(), cfg)?;
    nn::save_model(&model, &history, dir)?;
    Ok(history)
}

pub fn evaluate_model(model_dir: &Path, ds: &LabeledDataset) -> CliResult<Stamped<nn::EvalReport>> {
    let (model, _) = nn::load_model(model_dir)?;
    let report = nn::evaluate(&model, ds.features().view(), ds.targets()?.view())?;
    let model_hash = io::config_hash(&(model.dims(), model.train_config));
    Ok(stamp(report, &(model_hash, &ds.meta.config_hash)))
}

pub fn graph_stats(
    datasets: &[LabeledDataset],
    out_path: Option<&Path>,
    csv: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<()> {
    let report = correlation_report(datasets)?;
    if let Some(p) = csv {
        io::atomic_write(p, report.records_csv().as_bytes())?;
    }
    let hashes: Vec<&str> = datasets.iter().map(|d| d.meta.config_hash.as_str()).collect();
    emit(&stamp(report, &hashes), out_path, out)
}
