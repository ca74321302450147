//! Config-driven runs of gen → label → split → train → eval → graph-stats.
//!
//! The config has no defaults: every key must be present and unknown keys are
//! rejected, so the file alone reproduces a run. Stage seeds are derived from
//! the global seed.

use std::io::sink;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mcnpower::datagen::{self, GenMethod, GenSpec, LabeledDataset, Part, WeightScheme};
use mcnpower::nn::{EvalReport, TrainConfig};
use mcnpower::rng::derive_seed;
use mcnpower::{io, Error};

use crate::{evaluate_model, generate_dataset, graph_stats, stamp, train_model, CliResult, SampledIndex};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Artifact root; relative paths resolve against the working directory.
    pub out_dir: PathBuf,
    pub gen: GenStage,
    pub label: LabelStage,
    pub split: SplitStage,
    pub train: TrainStage,
    pub eval: EvalStage,
    pub graph_stats: GraphStatsStage,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenStage {
    pub method: GenMethod,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub p: f64,
    pub c: usize,
    pub alpha: f64,
    pub beta: f64,
    pub weights: WeightScheme,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelStage {
    pub index: SampledIndex,
    pub samples: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitStage {
    /// Share of datapoints in the training part.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainStage {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalStage {
    /// Which split part the model is scored on.
    pub part: Part,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphStatsStage {
    pub enabled: bool,
    pub emit_csv: bool,
}

impl PipelineConfig {
    pub fn from_json(bytes: &[u8]) -> Result<Self, Error> {
        Ok(serde_json::from_slice(bytes)?)
    }

    pub fn gen_spec(&self) -> GenSpec {
        let g = &self.gen;
        GenSpec {
            method: g.method,
            k: g.k,
            n: g.n,
            m: g.m,
            p: g.p,
            c: g.c,
            alpha: g.alpha,
            beta: g.beta,
            weights: g.weights,
            seed: derive_seed(self.seed, 0),
        }
    }

    pub fn label_seed(&self) -> u64 {
        derive_seed(self.seed, 1)
    }

    pub fn split_seed(&self) -> u64 {
        derive_seed(self.seed, 2)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch,
            learning_rate: self.train.lr,
            seed: derive_seed(self.seed, 3),
            ..TrainConfig::default()
        }
    }
}

/// Where a pipeline run puts its artifacts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineLayout {
    pub data: PathBuf,
    pub train: PathBuf,
    pub test: PathBuf,
    pub model: PathBuf,
    pub eval: PathBuf,
    pub graph_stats: PathBuf,
    pub graph_stats_csv: PathBuf,
    pub config: PathBuf,
}

impl PipelineLayout {
    pub fn new(root: &Path) -> Self {
        PipelineLayout {
            data: root.join("data"),
            train: root.join("train"),
            test: root.join("test"),
            model: root.join("model"),
            eval: root.join("eval.json"),
            graph_stats: root.join("graph_stats.json"),
            graph_stats_csv: root.join("graph_stats.csv"),
            config: root.join("config.json"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineSummary {
    pub config_hash: String,
    pub stages: Vec<&'static str>,
    pub layout: PipelineLayout,
    pub eval: EvalReport,
}

fn in_stage<T>(stage: &'static str, r: CliResult<T>) -> CliResult<T> {
    r.map_err(|mut e| {
        e.stage.get_or_insert(stage);
        e
    })
}

pub fn run_pipeline(cfg: &PipelineConfig, workers: usize) -> CliResult<PipelineSummary> {
    let layout = PipelineLayout::new(&cfg.out_dir);
    let config_hash = io::config_hash(cfg);
    let mut stages = Vec::new();

    in_stage("setup", (|| {
        io::create_dir(&cfg.out_dir)?;
        io::write_json(&layout.config, &stamp(cfg, cfg))?;
        Ok(())
    })())?;

    let mut ds = in_stage("gen", (|| {
        let ds = generate_dataset(&cfg.gen_spec())?;
        ds.save(&layout.data)?;
        Ok(ds)
    })())?;
    stages.push("gen");

    in_stage("label", (|| {
        ds.label(cfg.label.index.into(), cfg.label.samples, cfg.label_seed(), workers)?;
        ds.save(&layout.data)?;
        Ok(())
    })())?;
    stages.push("label");

    let (train, test) = in_stage("split", (|| {
        let (train, test) = datagen::split_dataset(&ds, cfg.split.ratio, cfg.split_seed())?;
        train.save(&layout.train)?;
        test.save(&layout.test)?;
        Ok((train, test))
    })())?;
    stages.push("split");

    in_stage("train", train_model(&train, &cfg.train_config(), &layout.model).map(drop))?;
    stages.push("train");

    let eval = in_stage("eval", (|| {
        let scored: &LabeledDataset = match cfg.eval.part {
            Part::Train => &train,
            Part::Test => &test,
        };
        let report = evaluate_model(&layout.model, scored)?;
        io::write_json(&layout.eval, &report)?;
        Ok(report.report)
    })())?;
    stages.push("eval");

    if cfg.graph_stats.enabled {
        in_stage("graph-stats", {
            let csv = cfg.graph_stats.emit_csv.then_some(layout.graph_stats_csv.as_path());
            graph_stats(std::slice::from_ref(&ds), Some(&layout.graph_stats), csv, &mut sink())
        })?;
        stages.push("graph-stats");
    }

    Ok(PipelineSummary {
        config_hash,
        stages,
        layout,
        eval,
    })
}
