//! Model directory: `model.json` (dims, training config, format version,
//! config hash) and `weights.bin` (little-endian `f64`, layer by layer,
//! weights row-major `in × out` then bias, followed by the output shift and
//! output scale vectors).

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Dense, MlpModel, TrainConfig};
use crate::error::{Error, Result};
use crate::io;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelMeta {
    format_version: u32,
    dims: Vec<usize>,
    dropout: f64,
    train_config: Option<TrainConfig>,
    loss_history: Vec<f64>,
    config_hash: String,
}

pub fn save_model(model: &MlpModel, loss_history: &[f64], dir: &Path) -> Result<()> {
    io::create_dir(dir)?;
    let dims = model.dims();
    let meta = ModelMeta {
        format_version: MODEL_FORMAT_VERSION,
        config_hash: io::config_hash(&(&dims, model.dropout, &model.train_config)),
        dims,
        dropout: model.dropout,
        train_config: model.train_config,
        loss_history: loss_history.to_vec(),
    };
    let mut values = model.flat_params();
    values.extend(model.output_shift.iter().chain(model.output_scale.iter()));
    io::atomic_write(&dir.join("weights.bin"), &io::f64_to_le(&values))?;
    io::write_json(&dir.join("model.json"), &meta)
}

/// Loads a model and its recorded loss history.
pub fn load_model(dir: &Path) -> Result<(MlpModel, Vec<f64>)> {
    let meta_path = dir.join("model.json");
    let meta: ModelMeta = io::read_json(&meta_path)?;
    if meta.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::FormatVersion {
            found: meta.format_version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    if meta.dims.len() < 2 || meta.dims.contains(&0) {
        return Err(Error::Corrupt {
            path: meta_path,
            reason: format!("invalid dims {:?}", meta.dims),
        });
    }
    let out = *meta.dims.last().unwrap();
    let count: usize = meta.dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum::<usize>() + 2 * out;
    let path = dir.join("weights.bin");
    let params = io::f64_from_le(&path, &io::read(&path)?, count)?;
    let mut it = params.into_iter();
    let layers = meta
        .dims
        .windows(2)
        .map(|w| Dense {
            weights: Array2::from_shape_vec((w[0], w[1]), it.by_ref().take(w[0] * w[1]).collect())
                .expect("length checked"),
            bias: Array1::from_iter(it.by_ref().take(w[1])),
        })
        .collect();
    let mut model = MlpModel::from_layers(layers, meta.dropout)?;
    model.output_shift = Array1::from_iter(it.by_ref().take(out));
    model.output_scale = Array1::from_iter(it.by_ref().take(out));
    model.train_config = meta.train_config;
    Ok((model, meta.loss_history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{evaluate, train, MlpModel};

    #[test]
    fn roundtrip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let x = Array2::from_shape_fn((12, 4), |(i, j)| ((i + j) % 3) as f64);
        let y = Array2::from_shape_fn((12, 2), |(i, _)| i as f64 / 12.0);
        let cfg = TrainConfig { epochs: 3, batch_size: 4, ..TrainConfig::default() };
        let (model, hist) =
            train(MlpModel::with_dims(&[4, 6, 2], 0.2, 1).unwrap(), x.view(), y.view(), &cfg)
                .unwrap();
        save_model(&model, &hist, dir.path()).unwrap();
        let (back, back_hist) = load_model(dir.path()).unwrap();
        assert_eq!(back, model);
        assert_eq!(back_hist, hist);
        assert_eq!(
            evaluate(&back, x.view(), y.view()).unwrap(),
            evaluate(&model, x.view(), y.view()).unwrap()
        );
    }

    #[test]
    fn corrupt_and_old_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let model = MlpModel::with_dims(&[3, 2], 0.0, 0).unwrap();
        save_model(&model, &[], dir.path()).unwrap();

        let weights = dir.path().join("weights.bin");
        let bytes = std::fs::read(&weights).unwrap();
        std::fs::write(&weights, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(load_model(dir.path()), Err(Error::Corrupt { .. })));
        std::fs::write(&weights, &bytes).unwrap();

        let meta_path = dir.path().join("model.json");
        let text = std::fs::read_to_string(&meta_path).unwrap();
        std::fs::write(&meta_path, text.replace("\"format_version\": 1", "\"format_version\": 0"))
            .unwrap();
        assert!(matches!(
            load_model(dir.path()),
            Err(Error::FormatVersion { found: 0, expected: 1 })
        ));

        std::fs::write(&meta_path, "{\"format_version\": 1").unwrap();
        assert!(matches!(load_model(dir.path()), Err(Error::Corrupt { .. })));
    }
}
