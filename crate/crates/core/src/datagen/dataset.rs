//! Encoded datasets and their on-disk form.
//!
//! A dataset directory holds:
//!
//! * `meta.json`: [`DatasetMeta`], including format version and config hash;
//! * `tensor.bin`: little-endian `f32`, row-major `k × n × (2w + 1)` where
//!   each rule slot is `w` required-agent bits, `w` banned-agent bits and
//!   the rule weight, and `w` is the (possibly padded) agent width;
//! * `labels.bin`: little-endian `f32`, row-major `k × w`, once labeled.

use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::GenSpec;
use crate::error::{Error, Result};
use crate::exact::IndexKind;
use crate::io;
use crate::mc::{mc_index, McConfig};
use crate::mcn::{AgentSet, Rule, RuleSet};
use crate::rng::{derive_seed, fisher_yates, stream_rng};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelInfo {
    pub kind: IndexKind,
    pub samples: u64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Train,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitInfo {
    pub part: Part,
    pub ratio: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub format_version: u32,
    /// Generator settings, when the games were generated here.
    pub generator: Option<GenSpec>,
    pub k: usize,
    pub n: usize,
    /// Agents in the underlying games.
    pub m: usize,
    /// Agent width of the encoding; larger than `m` after padding.
    pub width: usize,
    pub labels: Option<LabelInfo>,
    pub split: Option<SplitInfo>,
    pub config_hash: String,
}

impl DatasetMeta {
    pub fn slot_width(&self) -> usize {
        2 * self.width + 1
    }

    pub fn row_len(&self) -> usize {
        self.n * self.slot_width()
    }

    fn rehash(&mut self) {
        self.config_hash = io::config_hash(&(
            self.format_version,
            &self.generator,
            (self.k, self.n, self.m, self.width),
            &self.labels,
            &self.split,
        ));
    }
}

/// Encoded games plus optional per-agent labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub meta: DatasetMeta,
    pub tensor: Vec<f32>,
    pub labels: Option<Vec<f32>>,
}

impl LabeledDataset {
    /// Encodes games that share `n` and `m`.
    pub fn encode(rulesets: &[RuleSet], generator: Option<GenSpec>) -> Result<Self> {
        let first = rulesets.first().ok_or(Error::EmptyDataset)?;
        let (n, m) = (first.len(), first.m());
        if n == 0 {
            return Err(Error::invalid("games must have at least one rule"));
        }
        let mut meta = DatasetMeta {
            format_version: FORMAT_VERSION,
            generator,
            k: rulesets.len(),
            n,
            m,
            width: m,
            labels: None,
            split: None,
            config_hash: String::new(),
        };
        meta.rehash();
        let mut tensor = Vec::with_capacity(meta.k * meta.row_len());
        for (i, rs) in rulesets.iter().enumerate() {
            if rs.len() != n || rs.m() != m {
                return Err(Error::Datapoint {
                    index: i,
                    source: Box::new(Error::ShapeMismatch {
                        expected: format!("{n} rules over {m} agents"),
                        got: format!("{} rules over {} agents", rs.len(), rs.m()),
                    }),
                });
            }
            for r in rs.rules() {
                tensor.extend((0..m).map(|a| r.req.contains(a) as u8 as f32));
                tensor.extend((0..m).map(|a| r.ban.contains(a) as u8 as f32));
                tensor.push(r.weight as f32);
            }
        }
        Ok(LabeledDataset {
            meta,
            tensor,
            labels: None,
        })
    }

    pub fn len(&self) -> usize {
        self.meta.k
    }

    pub fn is_empty(&self) -> bool {
        self.meta.k == 0
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let len = self.meta.row_len();
        &self.tensor[i * len..(i + 1) * len]
    }

    pub fn label_row(&self, i: usize) -> Option<&[f32]> {
        let w = self.meta.width;
        self.labels.as_ref().map(|l| &l[i * w..(i + 1) * w])
    }

    /// Decodes datapoint `i` back into a game over the original `m` agents.
    pub fn ruleset(&self, i: usize) -> Result<RuleSet> {
        let meta = &self.meta;
        let (w, m) = (meta.width, meta.m);
        let corrupt = |reason: String| Error::Datapoint {
            index: i,
            source: Box::new(Error::invalid(reason)),
        };
        let rules = self
            .row(i)
            .chunks_exact(meta.slot_width())
            .enumerate()
            .map(|(r, slot)| {
                let mask = |bits: &[f32]| -> Result<AgentSet> {
                    let mut set = AgentSet::EMPTY;
                    for (a, &b) in bits.iter().enumerate() {
                        if b == 1.0 && a < m {
                            set = set.with(a);
                        } else if b != 0.0 {
                            return Err(corrupt(format!("rule {r}: bad bit {b} at agent {a}")));
                        }
                    }
                    Ok(set)
                };
                Ok(Rule::new(
                    mask(&slot[..w])?,
                    mask(&slot[w..2 * w])?,
                    slot[2 * w] as f64,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        RuleSet::new(m, rules).map_err(|e| Error::Datapoint {
            index: i,
            source: Box::new(e),
        })
    }

    pub fn rulesets(&self) -> Result<Vec<RuleSet>> {
        (0..self.meta.k).map(|i| self.ruleset(i)).collect()
    }

    /// Flattened rule slabs as an `k × n(2w+1)` feature matrix.
    pub fn features(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.meta.k, self.meta.row_len()), |(i, j)| {
            self.tensor[i * self.meta.row_len() + j] as f64
        })
    }

    /// Labels as a `k × w` matrix.
    pub fn targets(&self) -> Result<Array2<f64>> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::invalid("dataset has no labels"))?;
        let w = self.meta.width;
        Ok(Array2::from_shape_fn((self.meta.k, w), |(i, j)| {
            labels[i * w + j] as f64
        }))
    }

    /// Datapoints at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        let len = self.meta.row_len();
        let w = self.meta.width;
        let mut meta = self.meta.clone();
        meta.k = indices.len();
        let tensor = indices
            .iter()
            .flat_map(|&i| self.tensor[i * len..(i + 1) * len].iter().copied())
            .collect();
        let labels = self.labels.as_ref().map(|l| {
            indices
                .iter()
                .flat_map(|&i| l[i * w..(i + 1) * w].iter().copied())
                .collect()
        });
        meta.rehash();
        LabeledDataset {
            meta,
            tensor,
            labels,
        }
    }

    /// Labels every datapoint with a Monte-Carlo index.
    pub fn label(&mut self, kind: IndexKind, samples: u64, seed: u64, workers: usize) -> Result<()> {
        if self.meta.width != self.meta.m {
            return Err(Error::invalid("label before padding"));
        }
        let games = self.rulesets()?;
        let labels = label_rulesets(&games, kind, samples, seed, workers)?;
        self.labels = Some(labels.into_iter().flatten().map(|x| x as f32).collect());
        self.meta.labels = Some(LabelInfo {
            kind,
            samples,
            seed,
        });
        self.meta.rehash();
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        io::create_dir(dir)?;
        io::atomic_write(&dir.join("tensor.bin"), &io::f32_to_le(&self.tensor))?;
        if let Some(labels) = &self.labels {
            io::atomic_write(&dir.join("labels.bin"), &io::f32_to_le(labels))?;
        }
        // meta last: its presence marks a complete dataset
        io::write_json(&dir.join("meta.json"), &self.meta)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("meta.json");
        let meta: DatasetMeta = io::read_json(&meta_path)?;
        if meta.format_version != FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: meta.format_version,
                expected: FORMAT_VERSION,
            });
        }
        if meta.width < meta.m || meta.n == 0 || meta.m == 0 {
            return Err(Error::Corrupt {
                path: meta_path,
                reason: "inconsistent dimensions".into(),
            });
        }
        let tensor_path = dir.join("tensor.bin");
        let tensor = io::f32_from_le(
            &tensor_path,
            &io::read(&tensor_path)?,
            meta.k * meta.row_len(),
        )?;
        let labels = match meta.labels {
            Some(_) => {
                let path = dir.join("labels.bin");
                Some(io::f32_from_le(&path, &io::read(&path)?, meta.k * meta.width)?)
            }
            None => None,
        };
        Ok(LabeledDataset {
            meta,
            tensor,
            labels,
        })
    }
}

/// Monte-Carlo labels, one row per game. Game `i` uses seed
/// `derive_seed(seed, i)`; games are spread over `workers` threads.
pub fn label_rulesets(
    rulesets: &[RuleSet],
    kind: IndexKind,
    samples: u64,
    seed: u64,
    workers: usize,
) -> Result<Vec<Vec<f64>>> {
    if workers == 0 {
        return Err(Error::invalid("workers must be at least 1"));
    }
    let one = |(i, rs): (usize, &RuleSet)| {
        let cfg = McConfig::new(samples, derive_seed(seed, i as u64));
        mc_index(rs, kind, &cfg)
            .map(|pv| pv.values)
            .map_err(|e| Error::Datapoint {
                index: i,
                source: Box::new(e),
            })
    };
    if workers == 1 {
        rulesets.iter().enumerate().map(one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
        pool.install(|| rulesets.par_iter().enumerate().map(one).collect())
    }
}

/// Encodes and labels games in one step.
pub fn label_dataset(
    rulesets: &[RuleSet],
    generator: Option<GenSpec>,
    kind: IndexKind,
    samples: u64,
    seed: u64,
    workers: usize,
) -> Result<LabeledDataset> {
    let mut ds = LabeledDataset::encode(rulesets, generator)?;
    ds.label(kind, samples, seed, workers)?;
    Ok(ds)
}

/// Widens the req and ban blocks (and labels) to `target_m` agents with
/// zero columns on the right.
pub fn pad_dataset(ds: &LabeledDataset, target_m: usize) -> Result<LabeledDataset> {
    let old = ds.meta.width;
    if target_m < old {
        return Err(Error::invalid(format!(
            "cannot pad width {old} down to {target_m}"
        )));
    }
    let n = ds.meta.n;
    let mut meta = ds.meta.clone();
    meta.width = target_m;
    let mut tensor = Vec::with_capacity(meta.k * meta.row_len());
    for slot in ds.tensor.chunks_exact(2 * old + 1) {
        for block in [&slot[..old], &slot[old..2 * old]] {
            tensor.extend_from_slice(block);
            tensor.extend(std::iter::repeat_n(0.0, target_m - old));
        }
        tensor.push(slot[2 * old]);
    }
    debug_assert_eq!(tensor.len(), meta.k * n * meta.slot_width());
    let labels = ds.labels.as_ref().map(|l| {
        l.chunks_exact(old)
            .flat_map(|row| {
                row.iter()
                    .copied()
                    .chain(std::iter::repeat_n(0.0, target_m - old))
            })
            .collect()
    });
    meta.rehash();
    Ok(LabeledDataset {
        meta,
        tensor,
        labels,
    })
}

/// Shuffles datapoint indices with `seed` and cuts them into
/// `round(k · ratio)` training and the rest test datapoints.
pub fn split_dataset(
    ds: &LabeledDataset,
    ratio: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!("split ratio {ratio} outside (0, 1)")));
    }
    let k = ds.meta.k;
    let n_train = (k as f64 * ratio).round() as usize;
    if n_train == 0 || n_train == k {
        return Err(Error::invalid(format!(
            "split of {k} datapoints at ratio {ratio} leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..k).collect();
    fisher_yates(&mut order, &mut stream_rng(seed, 0));
    let (train_idx, test_idx) = order.split_at(n_train);
    let mut train = ds.select(train_idx);
    let mut test = ds.select(test_idx);
    for (part, d) in [(Part::Train, &mut train), (Part::Test, &mut test)] {
        d.meta.split = Some(SplitInfo { part, ratio, seed });
        d.meta.rehash();
    }
    Ok((train, test))
}
