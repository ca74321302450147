//! Dense feed-forward regressor for per-agent power indices.
//!
//! The network is `input → 512 → 256 → 128 → output`, with ReLU and inverted
//! dropout after each hidden layer and a linear output. It is trained on
//! mean squared error with Adam. Weights are stored `in × out` so a batch
//! `X` (rows are datapoints) maps to `X·W + b`.
//!
//! Weights are initialized He-uniform, `U(-√(6/fan_in), √(6/fan_in))`, with
//! zero biases.
//!
//! The linear output is followed by a fixed per-output affine map
//! `out·scale + shift`. Training fits it to the column mean and standard
//! deviation of the targets, so the network itself regresses unit-scale
//! values even when the power indices are of order 1e-3.

mod file;

pub use file::{load_model, save_model, MODEL_FORMAT_VERSION};

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, fisher_yates, stream_rng, StreamRng};

pub const HIDDEN_DIMS: [usize; 3] = [512, 256, 128];
pub const DROPOUT_RATE: f64 = 0.2;

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `in × out`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Dense {
            weights: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Dense>,
    pub dropout: f64,
    /// Added to the last layer's output after scaling.
    pub output_shift: Array1<f64>,
    pub output_scale: Array1<f64>,
    /// Settings of the last training run, if any.
    pub train_config: Option<TrainConfig>,
}

impl MlpModel {
    /// He-uniform weights for the given layer widths, zero biases.
    pub fn with_dims(dims: &[usize], dropout: f64, seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::invalid(format!("invalid layer dims {dims:?}")));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::invalid(format!("dropout {dropout} outside [0, 1)")));
        }
        let mut rng = stream_rng(seed, 0);
        let layers = dims
            .windows(2)
            .map(|w| {
                let bound = (6.0 / w[0] as f64).sqrt();
                Dense {
                    weights: Array2::from_shape_simple_fn((w[0], w[1]), || {
                        rng.random_range(-bound..bound)
                    }),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        MlpModel::from_layers(layers, dropout)
    }

    pub fn from_layers(layers: Vec<Dense>, dropout: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("model needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].weights.ncols() != pair[1].weights.nrows() {
                return Err(Error::ShapeMismatch {
                    expected: format!("layer {} input {}", i + 1, pair[0].weights.ncols()),
                    got: pair[1].weights.nrows().to_string(),
                });
            }
        }
        for l in &layers {
            if l.bias.len() != l.weights.ncols() {
                return Err(Error::invalid("bias length differs from layer width"));
            }
        }
        let out = layers.last().unwrap().weights.ncols();
        Ok(MlpModel {
            layers,
            dropout,
            output_shift: Array1::zeros(out),
            output_scale: Array1::ones(out),
            train_config: None,
        })
    }

    /// Sets the output map to the column means and standard deviations of
    /// `y`; constant columns keep scale 1.
    pub fn fit_output_scaling(&mut self, y: ArrayView2<f64>) {
        if y.nrows() == 0 {
            return;
        }
        self.output_shift = y.mean_axis(Axis(0)).unwrap();
        self.output_scale = y
            .std_axis(Axis(0), 0.0)
            .mapv(|s| if s > 1e-12 { s } else { 1.0 });
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.weights.ncols()))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weights.ncols()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// All parameters, layer by layer: weights row-major, then bias.
    pub fn flat_params(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} parameters", self.param_count()),
                got: params.len().to_string(),
            });
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(())
    }
}

pub(crate) fn flatten(layers: &[Dense]) -> Vec<f64> {
    layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
        .collect()
}

/// `[input_dim, 512, 256, 128, output_dim]` with 20% dropout.
pub fn init_model(input_dim: usize, output_dim: usize, seed: u64) -> Result<MlpModel> {
    let mut dims = vec![input_dim];
    dims.extend(HIDDEN_DIMS);
    dims.push(output_dim);
    MlpModel::with_dims(&dims, DROPOUT_RATE, seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Dropout active, masks drawn from the given seed.
    Train { seed: u64 },
}

struct Trace {
    /// Input to each layer (after activation and dropout of the previous).
    inputs: Vec<Array2<f64>>,
    /// Hidden pre-activations.
    pre: Vec<Array2<f64>>,
    /// Scaled dropout masks per hidden layer.
    masks: Vec<Option<Array2<f64>>>,
    output: Array2<f64>,
}

fn check_width(model: &MlpModel, x: &ArrayView2<f64>) -> Result<()> {
    if x.ncols() != model.input_dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} input features", model.input_dim()),
            got: x.ncols().to_string(),
        });
    }
    Ok(())
}

fn run(model: &MlpModel, x: ArrayView2<f64>, mut rng: Option<&mut StreamRng>) -> Trace {
    let last = model.layers.len() - 1;
    let keep = 1.0 - model.dropout;
    let mut trace = Trace {
        inputs: Vec::with_capacity(model.layers.len()),
        pre: Vec::with_capacity(last),
        masks: Vec::with_capacity(last),
        output: Array2::zeros((0, 0)),
    };
    let mut a = x.to_owned();
    for (i, layer) in model.layers.iter().enumerate() {
        let z = a.dot(&layer.weights) + &layer.bias;
        trace.inputs.push(a);
        if i == last {
            trace.output = z * &model.output_scale + &model.output_shift;
            break;
        }
        let mut h = z.mapv(|v| v.max(0.0));
        let mask = match rng.as_deref_mut() {
            Some(rng) if model.dropout > 0.0 => {
                let m = Array2::from_shape_simple_fn(h.raw_dim(), || {
                    if rng.random_bool(keep) {
                        1.0 / keep
                    } else {
                        0.0
                    }
                });
                h *= &m;
                Some(m)
            }
            _ => None,
        };
        trace.pre.push(z);
        trace.masks.push(mask);
        a = h;
    }
    trace
}

/// Predictions for a batch whose rows are datapoints.
pub fn forward(model: &MlpModel, x: ArrayView2<f64>, mode: Mode) -> Result<Array2<f64>> {
    check_width(model, &x)?;
    Ok(match mode {
        Mode::Eval => run(model, x, None).output,
        Mode::Train { seed } => run(model, x, Some(&mut stream_rng(seed, 0))).output,
    })
}

fn backward(model: &MlpModel, trace: &Trace, mut grad: Array2<f64>) -> Vec<Dense> {
    grad *= &model.output_scale;
    let mut grads: Vec<Dense> = Vec::with_capacity(model.layers.len());
    for i in (0..model.layers.len()).rev() {
        if i < model.layers.len() - 1 {
            if let Some(mask) = &trace.masks[i] {
                grad *= mask;
            }
            Zip::from(&mut grad)
                .and(&trace.pre[i])
                .for_each(|g, &z| {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                });
        }
        let dw = trace.inputs[i].t().dot(&grad);
        let db = grad.sum_axis(Axis(0));
        if i > 0 {
            grad = grad.dot(&model.layers[i].weights.t());
        }
        grads.push(Dense {
            weights: dw,
            bias: db,
        });
    }
    grads.reverse();
    grads
}

fn mse_and_grad(pred: &Array2<f64>, y: &ArrayView2<f64>) -> (f64, Array2<f64>) {
    let cells = pred.len() as f64;
    let diff = pred - y;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / cells;
    (loss, diff * (2.0 / cells))
}

/// Mean squared error of the batch and its exact gradient with respect to
/// every parameter.
pub fn loss_and_gradients(
    model: &MlpModel,
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    mode: Mode,
) -> Result<(f64, Vec<Dense>)> {
    check_width(model, &x)?;
    check_targets(model, &x, &y)?;
    let trace = match mode {
        Mode::Eval => run(model, x, None),
        Mode::Train { seed } => run(model, x, Some(&mut stream_rng(seed, 0))),
    };
    let (loss, g) = mse_and_grad(&trace.output, &y);
    Ok((loss, backward(model, &trace, g)))
}

fn check_targets(model: &MlpModel, x: &ArrayView2<f64>, y: &ArrayView2<f64>) -> Result<()> {
    if y.nrows() != x.nrows() || y.ncols() != model.output_dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} × {} targets", x.nrows(), model.output_dim()),
            got: format!("{} × {}", y.nrows(), y.ncols()),
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Mse,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub loss: Loss,
    /// Fit the output map to the training targets and train on standardized
    /// targets. The loss history is then in standardized units.
    pub scale_targets: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 256,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            loss: Loss::Mse,
            scale_targets: true,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..1.0).contains(&x);
        if self.epochs == 0
            || self.batch_size == 0
            || !(self.learning_rate > 0.0)
            || !(self.eps > 0.0)
            || !unit(self.beta1)
            || !unit(self.beta2)
        {
            return Err(Error::invalid(format!("invalid training config {self:?}")));
        }
        Ok(())
    }
}

struct Adam {
    m: Vec<Dense>,
    v: Vec<Dense>,
    t: i32,
}

impl Adam {
    fn new(model: &MlpModel) -> Self {
        let zeros = || {
            model
                .layers
                .iter()
                .map(|l| Dense::zeros(l.weights.nrows(), l.weights.ncols()))
                .collect()
        };
        Adam {
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut MlpModel, grads: &[Dense], cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (cfg.beta1, cfg.beta2, cfg.learning_rate, cfg.eps);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, &g: &f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (((layer, m), v), g) in model
            .layers
            .iter_mut()
            .zip(&mut self.m)
            .zip(&mut self.v)
            .zip(grads)
        {
            Zip::from(&mut layer.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .and(&g.weights)
                .for_each(update);
            Zip::from(&mut layer.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .and(&g.bias)
                .for_each(update);
        }
    }
}

/// Minibatch Adam on mean squared error. Returns the trained model and the
/// mean training loss of each epoch.
///
/// Epoch `e` shuffles with stream `e` of `cfg.seed` and draws dropout masks
/// from stream `e` of a derived seed, so training is reproducible.
pub fn train(
    mut model: MlpModel,
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    cfg: &TrainConfig,
) -> Result<(MlpModel, Vec<f64>)> {
    cfg.validate()?;
    check_width(&model, &x)?;
    check_targets(&model, &x, &y)?;
    if x.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    // with scaling on, the net is fit to standardized targets under an
    // identity map and the fitted map is attached afterwards
    let mut fitted_map = None;
    let scaled;
    let y = if cfg.scale_targets {
        model.fit_output_scaling(y);
        let out = model.output_shift.len();
        let shift = std::mem::replace(&mut model.output_shift, Array1::zeros(out));
        let scale = std::mem::replace(&mut model.output_scale, Array1::ones(out));
        scaled = (&y - &shift) / &scale;
        fitted_map = Some((shift, scale));
        scaled.view()
    } else {
        y
    };
    let mut adam = Adam::new(&model);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let dropout_seed = derive_seed(cfg.seed, 1);
    for epoch in 0..cfg.epochs {
        fisher_yates(&mut order, &mut stream_rng(cfg.seed, epoch as u64));
        let mut dropout_rng = stream_rng(dropout_seed, epoch as u64);
        let mut sse = 0.0;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let xb = x.select(Axis(0), idx);
            let yb = y.select(Axis(0), idx);
            let trace = run(&model, xb.view(), Some(&mut dropout_rng));
            let (loss, g) = mse_and_grad(&trace.output, &yb.view());
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch });
            }
            sse += loss * yb.len() as f64;
            let grads = backward(&model, &trace, g);
            adam.step(&mut model, &grads, cfg);
        }
        history.push(sse / y.len() as f64);
    }
    if let Some((shift, scale)) = fitted_map {
        model.output_shift = shift;
        model.output_scale = scale;
    }
    model.train_config = Some(*cfg);
    Ok((model, history))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mae: f64,
    pub mse: f64,
    pub per_agent_mae: Vec<f64>,
}

/// Error of eval-mode predictions over every (datapoint, output) cell.
pub fn evaluate(model: &MlpModel, x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<EvalReport> {
    check_width(model, &x)?;
    check_targets(model, &x, &y)?;
    if x.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let pred = predict(model, x)?;
    Ok(error_report(&pred.view(), &y))
}

/// Eval-mode predictions, computed in chunks to bound memory.
pub fn predict(model: &MlpModel, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    check_width(model, &x)?;
    let mut out = Array2::zeros((x.nrows(), model.output_dim()));
    for (xs, mut os) in x
        .axis_chunks_iter(Axis(0), 1024)
        .zip(out.axis_chunks_iter_mut(Axis(0), 1024))
    {
        os.assign(&run(model, xs, None).output);
    }
    Ok(out)
}

/// MAE, MSE and per-column MAE of predictions against targets.
pub fn error_report(pred: &ArrayView2<f64>, y: &ArrayView2<f64>) -> EvalReport {
    let diff = pred - y;
    let cells = diff.len() as f64;
    let abs = diff.mapv(f64::abs);
    EvalReport {
        mae: abs.sum() / cells,
        mse: diff.iter().map(|d| d * d).sum::<f64>() / cells,
        per_agent_mae: abs.mean_axis(Axis(0)).unwrap().to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn full_size_parameter_count() {
        let model = init_model(2020, 50, 0).unwrap();
        assert_eq!(model.dims(), vec![2020, 512, 256, 128, 50]);
        // 1_034_752 + 131_328 + 32_896 + 6_450
        let by_hand = (2020 * 512 + 512) + (512 * 256 + 256) + (256 * 128 + 128) + (128 * 50 + 50);
        assert_eq!(by_hand, 1_205_426);
        assert_eq!(model.param_count(), by_hand);
        assert_eq!(model.dropout, 0.2);
        assert!(model.layers.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn init_is_seeded() {
        assert_eq!(init_model(7, 3, 5).unwrap(), init_model(7, 3, 5).unwrap());
        assert_ne!(init_model(7, 3, 5).unwrap(), init_model(7, 3, 6).unwrap());
        assert!(init_model(0, 3, 5).is_err());
        let m = init_model(100, 3, 1).unwrap();
        let bound = (6.0f64 / 100.0).sqrt();
        assert!(m.layers[0].weights.iter().all(|w| w.abs() < bound));
    }

    #[test]
    fn zero_weights_predict_zero() {
        let mut model = init_model(6, 2, 1).unwrap();
        let zeros = vec![0.0; model.param_count()];
        model.set_flat_params(&zeros).unwrap();
        let x = Array2::from_shape_fn((4, 6), |(i, j)| (i * 7 + j) as f64 - 3.0);
        assert!(forward(&model, x.view(), Mode::Eval).unwrap().iter().all(|&p| p == 0.0));
        assert!(forward(&model, x.view(), Mode::Train { seed: 3 }).unwrap().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn eval_is_pure_and_train_mode_drops() {
        let model = init_model(10, 3, 2).unwrap();
        let x = Array2::from_shape_fn((5, 10), |(i, j)| ((i + 2 * j) % 5) as f64);
        let a = forward(&model, x.view(), Mode::Eval).unwrap();
        assert_eq!(a, forward(&model, x.view(), Mode::Eval).unwrap());
        let t1 = forward(&model, x.view(), Mode::Train { seed: 1 }).unwrap();
        assert_eq!(t1, forward(&model, x.view(), Mode::Train { seed: 1 }).unwrap());
        assert_ne!(t1, a);
        assert!(forward(&model, Array2::zeros((1, 9)).view(), Mode::Eval).is_err());
    }

    #[test]
    fn hand_computed_single_hidden_unit() {
        // x = (1, 2): z = 0.5·1 − 0.25·2 + 0.3 = 0.3, relu 0.3,
        // out = 3·0.3 − 0.2 = 0.7; and a negative pre-activation is cut.
        let model = MlpModel::from_layers(
            vec![
                Dense { weights: array![[0.5], [-0.25]], bias: array![0.3] },
                Dense { weights: array![[3.0]], bias: array![-0.2] },
            ],
            0.0,
        )
        .unwrap();
        let x = array![[1.0, 2.0], [0.0, 4.0]];
        let out = forward(&model, x.view(), Mode::Eval).unwrap();
        assert!((out[[0, 0]] - 0.7).abs() < 1e-12);
        assert!((out[[1, 0]] - (-0.2)).abs() < 1e-12);
    }

    #[test]
    fn layer_chaining_is_checked() {
        let bad = MlpModel::from_layers(
            vec![Dense::zeros(2, 3), Dense::zeros(4, 1)],
            0.0,
        );
        assert!(bad.is_err());
    }

    fn finite_difference_check(model: &MlpModel, x: &Array2<f64>, y: &Array2<f64>, mode: Mode) {
        let (_, grads) = loss_and_gradients(model, x.view(), y.view(), mode).unwrap();
        let analytic = flatten(&grads);
        let params = model.flat_params();
        let h = 1e-6;
        let mut probe = model.clone();
        for i in 0..params.len() {
            let mut p = params.clone();
            p[i] += h;
            probe.set_flat_params(&p).unwrap();
            let up = loss_and_gradients(&probe, x.view(), y.view(), mode).unwrap().0;
            p[i] -= 2.0 * h;
            probe.set_flat_params(&p).unwrap();
            let down = loss_and_gradients(&probe, x.view(), y.view(), mode).unwrap().0;
            let numeric = (up - down) / (2.0 * h);
            let (a, n) = (analytic[i], numeric);
            let err = (a - n).abs();
            assert!(
                err <= 1e-5 * a.abs().max(n.abs()) || err < 1e-9,
                "param {i}: analytic {a} numeric {n}"
            );
        }
    }

    #[test]
    fn five_parameter_gradient() {
        // 2 → 1 → 1: 2 + 1 + 1 + 1 parameters.
        let model = MlpModel::with_dims(&[2, 1, 1], 0.0, 4).unwrap();
        assert_eq!(model.param_count(), 5);
        let mut model = model;
        model.set_flat_params(&[0.7, -0.4, 0.05, 1.3, 0.2]).unwrap();
        let x = array![[1.0, 0.5], [0.3, -0.8], [2.0, 1.0]];
        let y = array![[0.4], [-0.1], [1.2]];
        finite_difference_check(&model, &x, &y, Mode::Eval);
    }

    #[test]
    fn gradient_with_dropout_mask() {
        // Random biases keep pre-activations off the ReLU kink; with zero
        // biases a sample whose inputs are all dropped sits exactly on it.
        let mut model = MlpModel::with_dims(&[4, 5, 3, 2], 0.2, 9).unwrap();
        let mut rng = stream_rng(3, 0);
        let params: Vec<f64> = (0..model.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        model.set_flat_params(&params).unwrap();
        let x = Array2::from_shape_fn((6, 4), |(i, j)| ((i * 3 + j * 5) % 7) as f64 / 3.0 - 1.0);
        let y = Array2::from_shape_fn((6, 2), |(i, j)| (i as f64 - j as f64) / 4.0);
        finite_difference_check(&model, &x, &y, Mode::Train { seed: 11 });
    }

    #[test]
    fn gradient_through_output_scaling() {
        let mut model = MlpModel::with_dims(&[3, 4, 2], 0.0, 5).unwrap();
        model.output_shift = array![0.5, -1.0];
        model.output_scale = array![0.01, 3.0];
        let x = Array2::from_shape_fn((5, 3), |(i, j)| ((i + 2 * j) % 5) as f64 / 2.0 - 1.0);
        let y = Array2::from_shape_fn((5, 2), |(i, j)| (i * j) as f64 / 5.0);
        finite_difference_check(&model, &x, &y, Mode::Eval);
    }

    #[test]
    fn output_scaling_fits_targets() {
        let mut model = MlpModel::with_dims(&[1, 2], 0.0, 0).unwrap();
        model.fit_output_scaling(array![[1.0, 7.0], [3.0, 7.0]].view());
        assert_eq!(model.output_shift, array![2.0, 7.0]);
        assert_eq!(model.output_scale, array![1.0, 1.0]);
        model.set_flat_params(&[0.0; 4]).unwrap();
        assert_eq!(forward(&model, array![[9.0]].view(), Mode::Eval).unwrap(), array![[2.0, 7.0]]);
    }

    #[test]
    fn memorizes_one_datapoint() {
        let model = MlpModel::with_dims(&[8, 16, 16, 3], 0.0, 1).unwrap();
        let x = Array2::from_shape_fn((1, 8), |(_, j)| (j % 3) as f64);
        let y = array![[0.3, -0.2, 0.05]];
        let cfg = TrainConfig { epochs: 500, batch_size: 1, seed: 2, ..TrainConfig::default() };
        let (model, history) = train(model, x.view(), y.view(), &cfg).unwrap();
        assert_eq!(history.len(), 500);
        let report = evaluate(&model, x.view(), y.view()).unwrap();
        assert!(report.mse < 1e-6, "{report:?}");
    }

    #[test]
    fn zero_labels_converge_to_zero() {
        let model = MlpModel::with_dims(&[6, 12, 2], 0.0, 3).unwrap();
        let x = Array2::from_shape_fn((20, 6), |(i, j)| ((i + j) % 2) as f64);
        let y = Array2::zeros((20, 2));
        let cfg = TrainConfig { epochs: 400, batch_size: 10, seed: 1, ..TrainConfig::default() };
        let (model, _) = train(model, x.view(), y.view(), &cfg).unwrap();
        assert!(evaluate(&model, x.view(), y.view()).unwrap().mse < 1e-8);
    }

    #[test]
    fn training_is_deterministic() {
        let x = Array2::from_shape_fn((30, 5), |(i, j)| ((i * j) % 4) as f64);
        let y = Array2::from_shape_fn((30, 2), |(i, j)| ((i + j) % 3) as f64 / 10.0);
        let cfg = TrainConfig { epochs: 5, batch_size: 8, seed: 4, ..TrainConfig::default() };
        let run = || {
            let model = MlpModel::with_dims(&[5, 8, 8, 2], 0.2, 0).unwrap();
            train(model, x.view(), y.view(), &cfg).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_loss_aborts() {
        let model = MlpModel::with_dims(&[2, 2], 0.0, 0).unwrap();
        let x = array![[1.0, f64::NAN]];
        let y = array![[0.0, 0.0]];
        let err = train(model, x.view(), y.view(), &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { epoch: 0, batch: 0 }));
    }

    #[test]
    fn evaluation_metrics() {
        let y = array![[0.2], [0.2]];
        let pred = array![[0.1], [0.3]];
        let r = error_report(&pred.view(), &y.view());
        assert!((r.mae - 0.1).abs() < 1e-12);
        assert!((r.mse - 0.01).abs() < 1e-12);

        let same = error_report(&y.view(), &y.view());
        assert_eq!((same.mae, same.mse), (0.0, 0.0));

        let mut zero = MlpModel::with_dims(&[1, 2], 0.0, 0).unwrap();
        zero.set_flat_params(&[0.0; 4]).unwrap();
        let labels = array![[0.5, -0.1], [0.3, 0.1]];
        let r = evaluate(&zero, Array2::zeros((2, 1)).view(), labels.view()).unwrap();
        assert!((r.mae - 0.25).abs() < 1e-12);
        assert_eq!(r.per_agent_mae, vec![0.4, 0.1]);
        assert!(matches!(
            evaluate(&zero, Array2::zeros((0, 1)).view(), Array2::zeros((0, 2)).view()),
            Err(Error::EmptyDataset)
        ));
    }
}
