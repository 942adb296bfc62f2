//! A small feed-forward binary classifier trained with minibatch SGD.
//!
//! The canonical architecture is fixed by [`init_model`]: ten inputs, two
//! ReLU hidden layers, and one sigmoid output unit trained against binary
//! cross-entropy. Everything is seeded and single-threaded, so a given
//! dataset, configuration, and seed always reproduce the same model down to
//! the last bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::data::{Dataset, FEATURE_COUNT};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seeding::stream_rng;

// Substreams of the training seed.
const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE_BASE: u64 = 1;

const MODEL_MAGIC: &str = "ckdmlp-model v1";

/// Numerically stable logistic function.
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Activation functions applied entrywise to pre-activations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative with respect to the pre-activation. The ReLU derivative
    /// at exactly zero is taken to be zero.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }

    fn from_tag(tag: &str) -> Option<Activation> {
        match tag {
            "relu" => Some(Activation::Relu),
            "sigmoid" => Some(Activation::Sigmoid),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Shape and activation of one layer, without its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

/// One dense layer: `out_dim x in_dim` weights, `out_dim x 1` bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Matrix,
    pub activation: Activation,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn spec(&self) -> LayerSpec {
        LayerSpec {
            in_dim: self.in_dim(),
            out_dim: self.out_dim(),
            activation: self.activation,
        }
    }
}

/// A validated multi-layer perceptron ending in a single sigmoid unit.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    layers: Vec<Layer>,
}

impl MlpModel {
    /// Validates layer chaining, parameter finiteness, and the sigmoid
    /// output head.
    pub fn new(layers: Vec<Layer>) -> Result<MlpModel> {
        if layers.is_empty() {
            return Err(Error::Config("model needs at least one layer".to_string()));
        }
        for (k, layer) in layers.iter().enumerate() {
            if layer.bias.cols() != 1 || layer.bias.rows() != layer.out_dim() {
                return Err(Error::Shape {
                    op: "model",
                    lhs: format!("{}x{} bias in layer {k}", layer.bias.rows(), layer.bias.cols()),
                    rhs: format!("{}x1", layer.out_dim()),
                });
            }
            if !layer.weights.is_finite() || !layer.bias.is_finite() {
                return Err(Error::Input(format!(
                    "layer {k} has non-finite parameters"
                )));
            }
            if k > 0 && layers[k - 1].out_dim() != layer.in_dim() {
                return Err(Error::Shape {
                    op: "model",
                    lhs: format!("layer {} output {}", k - 1, layers[k - 1].out_dim()),
                    rhs: format!("layer {k} input {}", layer.in_dim()),
                });
            }
        }
        let last = layers.last().expect("checked non-empty");
        if last.out_dim() != 1 || last.activation != Activation::Sigmoid {
            return Err(Error::Config(
                "final layer must be a single sigmoid unit".to_string(),
            ));
        }
        Ok(MlpModel { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable access to the layers, for in-place parameter updates.
    /// Callers must keep parameters finite and shapes unchanged.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    /// Runs the network on a batch of rows (one row per sample).
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward_trace(x)?.1.pop().expect("one activation per layer"))
    }

    /// Forward pass keeping per-layer pre-activations and activations.
    /// Returns `(pre_activations, activations)`; `activations[0]` is the
    /// input itself, so `activations` has one more entry than layers.
    fn forward_trace(&self, x: &Matrix) -> Result<(Vec<Matrix>, Vec<Matrix>)> {
        if x.cols() != self.input_dim() {
            return Err(Error::Shape {
                op: "forward",
                lhs: format!("{}x{}", x.rows(), x.cols()),
                rhs: format!("{} input features", self.input_dim()),
            });
        }
        if !x.is_finite() {
            return Err(Error::Input(
                "forward pass requires finite inputs".to_string(),
            ));
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for layer in &self.layers {
            let prev = activations.last().expect("seeded with the input");
            let z = prev.matmul(&layer.weights.transpose())?;
            let z = Matrix::from_fn(z.rows(), z.cols(), |i, j| z.get(i, j) + layer.bias.get(j, 0));
            let a = z.map(|v| layer.activation.apply(v));
            pre.push(z);
            activations.push(a);
        }
        Ok((pre, activations))
    }

    /// Classifies each row: probability at or above `threshold` means
    /// positive.
    pub fn predict(&self, x: &Matrix, threshold: f64) -> Result<Vec<u8>> {
        if !threshold.is_finite() || !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::Config(format!(
                "threshold must lie strictly between 0 and 1, got {threshold}"
            )));
        }
        let scores = self.forward(x)?;
        Ok((0..scores.rows())
            .map(|i| u8::from(scores.get(i, 0) >= threshold))
            .collect())
    }

    /// Exact gradients of the mean binary cross-entropy over the batch with
    /// respect to every weight and bias.
    pub fn backward(&self, x: &Matrix, labels: &[u8]) -> Result<Gradients> {
        if labels.len() != x.rows() {
            return Err(Error::Shape {
                op: "backward",
                lhs: format!("{} rows", x.rows()),
                rhs: format!("{} labels", labels.len()),
            });
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Input(format!("labels must be 0 or 1, found {bad}")));
        }
        let (pre, activations) = self.forward_trace(x)?;
        let n = x.rows();
        let nf = n as f64;
        let out = activations.last().expect("network has at least one layer");
        // The sigmoid head and the cross-entropy combine into one clean
        // residual: d(loss)/d(z_last) = (p - y) / n.
        let mut delta = Matrix::from_fn(n, 1, |i, _| (out.get(i, 0) - labels[i] as f64) / nf);
        let mut grads = Vec::with_capacity(self.layers.len());
        for k in (0..self.layers.len()).rev() {
            let grad_weights = delta.transpose().matmul(&activations[k])?;
            let grad_bias = Matrix::from_fn(delta.cols(), 1, |j, _| {
                (0..n).map(|i| delta.get(i, j)).sum()
            });
            if k > 0 {
                let back = delta.matmul(&self.layers[k].weights)?;
                let z_prev = &pre[k - 1];
                let act = self.layers[k - 1].activation;
                delta = Matrix::from_fn(n, back.cols(), |i, j| {
                    back.get(i, j) * act.derivative(z_prev.get(i, j))
                });
            }
            grads.push(LayerGradients {
                weights: grad_weights,
                bias: grad_bias,
            });
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    fn apply_gradients(&mut self, grads: &Gradients, learning_rate: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, gw) in layer.weights.data_mut().iter_mut().zip(g.weights.data()) {
                *w -= learning_rate * gw;
            }
            for (b, gb) in layer.bias.data_mut().iter_mut().zip(g.bias.data()) {
                *b -= learning_rate * gb;
            }
        }
    }

    /// Serializes the model to a plain-text file.
    ///
    /// Values are written with enough digits to round-trip exactly, so a
    /// saved and reloaded model is bit-identical to the original.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "{MODEL_MAGIC}");
        let _ = writeln!(out, "{}", self.layers.len());
        for layer in &self.layers {
            let _ = writeln!(
                out,
                "{} {} {}",
                layer.in_dim(),
                layer.out_dim(),
                layer.activation.tag()
            );
            let _ = writeln!(out, "{}", join_numbers(layer.weights.data()));
            let _ = writeln!(out, "{}", join_numbers(layer.bias.data()));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Reads a model saved by [`MlpModel::save`], validating the format and
    /// every invariant a constructed model has to satisfy.
    pub fn load(path: &Path) -> Result<MlpModel> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty model file".to_string()))?;
        if header != MODEL_MAGIC {
            return Err(Error::Format(format!(
                "unsupported header '{header}'; expected '{MODEL_MAGIC}'"
            )));
        }
        let count_line = lines
            .next()
            .ok_or_else(|| Error::Format("missing layer count".to_string()))?;
        let layer_count: usize = count_line
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad layer count '{count_line}'")))?;
        if layer_count == 0 {
            return Err(Error::Format("layer count must be at least 1".to_string()));
        }
        let mut layers = Vec::with_capacity(layer_count);
        for k in 0..layer_count {
            let dims = lines
                .next()
                .ok_or_else(|| Error::Format(format!("layer {k}: missing shape line")))?;
            let parts: Vec<&str> = dims.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::Format(format!(
                    "layer {k}: shape line must be 'in out activation', got '{dims}'"
                )));
            }
            let in_dim: usize = parts[0]
                .parse()
                .map_err(|_| Error::Format(format!("layer {k}: bad input dim '{}'", parts[0])))?;
            let out_dim: usize = parts[1]
                .parse()
                .map_err(|_| Error::Format(format!("layer {k}: bad output dim '{}'", parts[1])))?;
            if in_dim == 0 || out_dim == 0 {
                return Err(Error::Format(format!("layer {k}: dimensions must be >= 1")));
            }
            let activation = Activation::from_tag(parts[2]).ok_or_else(|| {
                Error::Format(format!("layer {k}: unknown activation '{}'", parts[2]))
            })?;
            let weights = parse_numbers(
                lines
                    .next()
                    .ok_or_else(|| Error::Format(format!("layer {k}: missing weights line")))?,
                in_dim * out_dim,
                &format!("layer {k} weights"),
            )?;
            let bias = parse_numbers(
                lines
                    .next()
                    .ok_or_else(|| Error::Format(format!("layer {k}: missing bias line")))?,
                out_dim,
                &format!("layer {k} bias"),
            )?;
            layers.push(Layer {
                weights: Matrix::from_vec(out_dim, in_dim, weights)?,
                bias: Matrix::from_vec(out_dim, 1, bias)?,
                activation,
            });
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(Error::Format(
                "trailing content after the last layer".to_string(),
            ));
        }
        MlpModel::new(layers).map_err(|e| Error::Format(format!("inconsistent model: {e}")))
    }
}

fn join_numbers(values: &[f64]) -> String {
    let mut out = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
    }
    out
}

fn parse_numbers(line: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = line
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Format(format!("{what}: unparsable number")))?;
    if values.len() != expected {
        return Err(Error::Format(format!(
            "{what}: expected {expected} values, found {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format(format!("{what}: values must be finite")));
    }
    Ok(values)
}

/// Gradients for one layer, shaped like the layer's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradients {
    pub weights: Matrix,
    pub bias: Matrix,
}

/// Gradients for every layer of a model, in layer order.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
}

/// Mean binary cross-entropy between predicted probabilities and labels.
///
/// Probabilities are clamped to `[1e-12, 1 - 1e-12]` before taking logs, so
/// the loss stays finite even on (over)confident mistakes.
pub fn bce_loss(pred: &Matrix, labels: &[u8]) -> Result<f64> {
    if pred.cols() != 1 {
        return Err(Error::Shape {
            op: "bce_loss",
            lhs: format!("{}x{}", pred.rows(), pred.cols()),
            rhs: "nx1 predictions".to_string(),
        });
    }
    if pred.rows() != labels.len() {
        return Err(Error::Shape {
            op: "bce_loss",
            lhs: format!("{} predictions", pred.rows()),
            rhs: format!("{} labels", labels.len()),
        });
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Input(format!("labels must be 0 or 1, found {bad}")));
    }
    let n = labels.len() as f64;
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let p = pred.get(i, 0).clamp(1e-12, 1.0 - 1e-12);
        total += if y == 1 { -p.ln() } else { -(1.0 - p).ln() };
    }
    Ok(total / n)
}

/// Initializes the canonical network: `10 -> h1 -> h2 -> 1` with ReLU hidden
/// layers and a sigmoid output. Weights are Glorot-uniform draws from the
/// seed; biases start at zero.
///
/// # Panics
/// Panics if either hidden dimension is zero.
pub fn init_model(hidden_dims: (usize, usize), seed: u64) -> MlpModel {
    assert!(
        hidden_dims.0 >= 1 && hidden_dims.1 >= 1,
        "hidden dimensions must be >= 1"
    );
    let dims = [FEATURE_COUNT, hidden_dims.0, hidden_dims.1, 1];
    let activations = [Activation::Relu, Activation::Relu, Activation::Sigmoid];
    let mut rng = stream_rng(seed, STREAM_INIT);
    let mut layers = Vec::with_capacity(3);
    for (k, &activation) in activations.iter().enumerate() {
        let (fan_in, fan_out) = (dims[k], dims[k + 1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        use rand::Rng;
        let weights = Matrix::from_fn(fan_out, fan_in, |_, _| rng.random_range(-limit..limit));
        layers.push(Layer {
            weights,
            bias: Matrix::zeros(fan_out, 1),
            activation,
        });
    }
    MlpModel::new(layers).expect("freshly initialized parameters are valid")
}

/// Hyperparameters for [`train`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// SGD step size; zero performs no updates.
    pub learning_rate: f64,
    pub batch_size: usize,
    pub hidden_dims: (usize, usize),
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            learning_rate: 0.01,
            batch_size: 32,
            hidden_dims: (32, 16),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".to_string()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".to_string()));
        }
        if self.hidden_dims.0 == 0 || self.hidden_dims.1 == 0 {
            return Err(Error::Config(
                "hidden dimensions must be at least 1".to_string(),
            ));
        }
        Ok(())
    }
}

/// Loss and accuracy at the end of one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

/// Per-epoch training curves.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<EpochRecord>,
}

impl TrainingLog {
    /// Renders the log as CSV. Validation columns are left empty when no
    /// validation data was supplied.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
        for r in &self.records {
            let _ = write!(out, "{},{},{}", r.epoch, r.train_loss, r.train_accuracy);
            match r.val_loss {
                Some(v) => {
                    let _ = write!(out, ",{v}");
                }
                None => out.push(','),
            }
            match r.val_accuracy {
                Some(v) => {
                    let _ = writeln!(out, ",{v}");
                }
                None => out.push_str(",\n"),
            }
        }
        out
    }

    /// Writes [`TrainingLog::to_csv`] to a file.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn check_trainable(ds: &Dataset, what: &str) -> Result<()> {
    if ds.missing_count() > 0 {
        return Err(Error::Input(format!(
            "{what} contains missing values; impute before training"
        )));
    }
    Ok(())
}

fn evaluate(model: &MlpModel, ds: &Dataset) -> Result<(f64, f64)> {
    let scores = model.forward(ds.features())?;
    let loss = bce_loss(&scores, ds.labels())?;
    let correct = (0..scores.rows())
        .filter(|&i| u8::from(scores.get(i, 0) >= 0.5) == ds.labels()[i])
        .count();
    Ok((loss, correct as f64 / ds.n_rows() as f64))
}

/// Trains a fresh network on `data` with minibatch SGD.
///
/// Each epoch shuffles the row order from its own substream of `cfg.seed`,
/// walks the rows in batches of `cfg.batch_size` (last batch may be short),
/// and applies one gradient step per batch. The returned log has one record
/// per epoch, evaluated on the full training set (and on `validation` when
/// given) after that epoch's updates.
pub fn train(
    data: &Dataset,
    validation: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainingLog)> {
    cfg.validate()?;
    check_trainable(data, "training data")?;
    if let Some(v) = validation {
        check_trainable(v, "validation data")?;
    }
    let mut model = init_model(cfg.hidden_dims, cfg.seed);
    let n = data.n_rows();
    let mut log = TrainingLog::default();
    use rand::seq::SliceRandom;
    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = stream_rng(cfg.seed, STREAM_SHUFFLE_BASE + (epoch - 1) as u64);
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let x = data.features().select_rows(chunk);
            let y: Vec<u8> = chunk.iter().map(|&i| data.labels()[i]).collect();
            let grads = model.backward(&x, &y)?;
            model.apply_gradients(&grads, cfg.learning_rate);
        }
        let (train_loss, train_accuracy) = evaluate(&model, data)?;
        let (val_loss, val_accuracy) = match validation {
            Some(v) => {
                let (l, a) = evaluate(&model, v)?;
                (Some(l), Some(a))
            }
            None => (None, None),
        };
        log.records.push(EpochRecord {
            epoch,
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
        });
    }
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DataSchema;

    /// sigmoid(3), i.e. 1 / (1 + e^-3).
    const SIGMOID_3: f64 = 0.9525741268224334;

    fn layer(weights: &[Vec<f64>], bias: &[f64], activation: Activation) -> Layer {
        Layer {
            weights: Matrix::from_rows(weights).unwrap(),
            bias: Matrix::from_vec(bias.len(), 1, bias.to_vec()).unwrap(),
            activation,
        }
    }

    /// The two-layer net used by several hand calculations:
    /// relu(x1 + x2) fed into sigmoid(1 * h).
    fn tiny_net() -> MlpModel {
        MlpModel::new(vec![
            layer(&[vec![1.0, 1.0]], &[0.0], Activation::Relu),
            layer(&[vec![1.0]], &[0.0], Activation::Sigmoid),
        ])
        .unwrap()
    }

    fn complete_dataset(features: Matrix, labels: Vec<u8>) -> Dataset {
        Dataset::complete(DataSchema::ckd(), features, labels).unwrap()
    }

    /// Small separable dataset: positives and negatives differ in two
    /// columns by several standard deviations.
    fn separable_dataset(n: usize) -> Dataset {
        let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let features = Matrix::from_fn(n, FEATURE_COUNT, |i, j| {
            let wiggle = ((i * 31 + j * 17) % 13) as f64 / 13.0 - 0.5;
            match j {
                5 => wiggle + if labels[i] == 1 { -2.0 } else { 2.0 },
                7 => wiggle + if labels[i] == 1 { 2.0 } else { -2.0 },
                _ => wiggle,
            }
        });
        complete_dataset(features, labels)
    }

    #[test]
    fn activation_values() {
        assert_eq!(Activation::Relu.apply(-1.5), 0.0);
        assert_eq!(Activation::Relu.apply(0.0), 0.0);
        assert_eq!(Activation::Relu.apply(2.5), 2.5);
        assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
        assert!((Activation::Sigmoid.apply(3.0) - SIGMOID_3).abs() < 1e-15);
        assert_eq!(Activation::Identity.apply(-4.25), -4.25);
    }

    #[test]
    fn sigmoid_is_stable_and_symmetric() {
        for z in [-700.0, -40.0, -3.0, 0.0, 3.0, 40.0, 700.0] {
            let p = sigmoid(z);
            assert!(p.is_finite());
            assert!((0.0..=1.0).contains(&p));
            assert!((p + sigmoid(-z) - 1.0).abs() < 1e-15, "z = {z}");
        }
        assert!(sigmoid(-745.0) >= 0.0);
        assert!(sigmoid(40.0) > sigmoid(3.0));
    }

    #[test]
    fn activation_derivatives() {
        assert_eq!(Activation::Relu.derivative(-0.5), 0.0);
        assert_eq!(Activation::Relu.derivative(0.0), 0.0);
        assert_eq!(Activation::Relu.derivative(3.0), 1.0);
        assert_eq!(Activation::Sigmoid.derivative(0.0), 0.25);
        assert_eq!(Activation::Identity.derivative(9.0), 1.0);
    }

    #[test]
    fn forward_hand_case() {
        let model = tiny_net();
        let x = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let p = model.forward(&x).unwrap();
        assert_eq!(p.shape(), (1, 1));
        assert!((p.get(0, 0) - SIGMOID_3).abs() < 1e-15);
    }

    #[test]
    fn forward_relu_zeroes_negative_preactivation() {
        // Pre-activation is -2; relu kills it, so the big second-layer
        // weight never matters and the output is exactly sigmoid(0).
        let model = MlpModel::new(vec![
            layer(&[vec![-1.0]], &[0.0], Activation::Relu),
            layer(&[vec![7.0]], &[0.0], Activation::Sigmoid),
        ])
        .unwrap();
        let x = Matrix::from_rows(&[vec![2.0]]).unwrap();
        assert_eq!(model.forward(&x).unwrap().get(0, 0), 0.5);
    }

    #[test]
    fn forward_batch_equals_per_row() {
        let model = init_model((4, 3), 9);
        let batch = Matrix::from_fn(5, FEATURE_COUNT, |i, j| {
            ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0
        });
        let joint = model.forward(&batch).unwrap();
        for i in 0..5 {
            let single = model
                .forward(&batch.select_rows(&[i]))
                .unwrap();
            assert_eq!(
                joint.get(i, 0).to_bits(),
                single.get(0, 0).to_bits(),
                "row {i} must not depend on its batch"
            );
        }
    }

    #[test]
    fn forward_outputs_are_probabilities() {
        let model = init_model((8, 4), 3);
        let x = Matrix::from_fn(20, FEATURE_COUNT, |i, j| {
            ((i * 13 + j * 5) % 17) as f64 / 4.0 - 2.0
        });
        let p = model.forward(&x).unwrap();
        assert!(p
            .data()
            .iter()
            .all(|&v| v > 0.0 && v < 1.0), "outputs must be strict probabilities");
    }

    #[test]
    fn forward_rejects_bad_input() {
        let model = init_model((4, 3), 0);
        let narrow = Matrix::zeros(2, 3);
        assert!(matches!(
            model.forward(&narrow).unwrap_err(),
            Error::Shape { .. }
        ));
        let mut nan = Matrix::zeros(1, FEATURE_COUNT);
        nan.set(0, 4, f64::NAN);
        assert!(matches!(model.forward(&nan).unwrap_err(), Error::Input(_)));
    }

    #[test]
    fn bce_hand_values() {
        let half = Matrix::from_rows(&[vec![0.5]]).unwrap();
        let loss = bce_loss(&half, &[1]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);

        let nine = Matrix::from_rows(&[vec![0.9]]).unwrap();
        let loss = bce_loss(&nine, &[1]).unwrap();
        assert!((loss - 0.10536051565782628).abs() < 1e-15, "-ln(0.9)");

        // Same prediction, opposite label: -ln(0.1) = ln(10).
        let loss = bce_loss(&nine, &[0]).unwrap();
        assert!((loss - std::f64::consts::LN_10).abs() < 1e-14);
    }

    #[test]
    fn bce_mean_over_batch() {
        let pred = Matrix::from_rows(&[vec![0.5], vec![0.9]]).unwrap();
        let loss = bce_loss(&pred, &[1, 1]).unwrap();
        let expected = (std::f64::consts::LN_2 + 0.10536051565782628) / 2.0;
        assert!((loss - expected).abs() < 1e-14);
    }

    #[test]
    fn bce_clamps_extreme_predictions() {
        let sure = Matrix::from_rows(&[vec![1.0]]).unwrap();
        let right = bce_loss(&sure, &[1]).unwrap();
        assert!((0.0..2e-12).contains(&right), "clamped hit: {right}");
        // The miss goes through 1 - (1 - 1e-12), which rounds at the ulp of
        // 1.0 and so recovers 1e-12 only to about 1e-4 relative accuracy.
        let wrong = bce_loss(&sure, &[0]).unwrap();
        assert!(
            (wrong - 12.0 * std::f64::consts::LN_10).abs() < 1e-3,
            "clamped miss is roughly -ln(1e-12): {wrong}"
        );
        let zero = Matrix::from_rows(&[vec![0.0]]).unwrap();
        assert!((bce_loss(&zero, &[1]).unwrap() - wrong).abs() < 1e-3);
    }

    #[test]
    fn bce_rejects_mismatches() {
        let pred = Matrix::zeros(2, 1);
        assert!(bce_loss(&pred, &[1]).is_err());
        assert!(bce_loss(&Matrix::zeros(2, 2), &[1, 0]).is_err());
        assert!(bce_loss(&pred, &[1, 2]).is_err());
    }

    #[test]
    fn model_validation() {
        assert!(MlpModel::new(vec![]).is_err());

        // Chain mismatch: layer 0 emits 2, layer 1 expects 3.
        let err = MlpModel::new(vec![
            layer(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.0, 0.0], Activation::Relu),
            layer(&[vec![1.0, 1.0, 1.0]], &[0.0], Activation::Sigmoid),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));

        // Final layer must be one sigmoid unit.
        assert!(MlpModel::new(vec![layer(
            &[vec![1.0]],
            &[0.0],
            Activation::Relu
        )])
        .is_err());
        assert!(MlpModel::new(vec![layer(
            &[vec![1.0], vec![2.0]],
            &[0.0, 0.0],
            Activation::Sigmoid
        )])
        .is_err());

        // Non-finite parameters.
        assert!(MlpModel::new(vec![layer(
            &[vec![f64::NAN]],
            &[0.0],
            Activation::Sigmoid
        )])
        .is_err());
    }

    #[test]
    fn init_model_architecture() {
        let model = init_model((32, 16), 0);
        let specs = model.specs();
        assert_eq!(specs.len(), 3);
        assert_eq!(
            specs[0],
            LayerSpec {
                in_dim: FEATURE_COUNT,
                out_dim: 32,
                activation: Activation::Relu
            }
        );
        assert_eq!(
            specs[1],
            LayerSpec {
                in_dim: 32,
                out_dim: 16,
                activation: Activation::Relu
            }
        );
        assert_eq!(
            specs[2],
            LayerSpec {
                in_dim: 16,
                out_dim: 1,
                activation: Activation::Sigmoid
            }
        );
    }

    #[test]
    fn init_model_glorot_bounds_and_zero_biases() {
        let model = init_model((7, 5), 21);
        let dims = [(FEATURE_COUNT, 7), (7, 5), (5, 1)];
        for (layer, (fan_in, fan_out)) in model.layers().iter().zip(dims) {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            assert!(
                layer.weights.data().iter().all(|w| w.abs() < limit),
                "weights exceed the Glorot bound {limit}"
            );
            assert!(layer.bias.data().iter().all(|&b| b == 0.0));
            // A degenerate draw (all weights equal) would mean the generator
            // is broken, not unlucky.
            let first = layer.weights.data()[0];
            assert!(layer.weights.data().iter().any(|&w| w != first));
        }
    }

    #[test]
    fn init_model_is_seeded() {
        assert_eq!(init_model((6, 4), 5), init_model((6, 4), 5));
        assert_ne!(init_model((6, 4), 5), init_model((6, 4), 6));
    }

    #[test]
    fn backward_hand_case_at_indifference() {
        // Single sigmoid unit on input 0: p = 0.5, so with label 1 the
        // output residual is -0.5, the bias gradient is -0.5, and the
        // weight gradient vanishes (input is 0).
        let model = MlpModel::new(vec![layer(&[vec![2.0]], &[0.0], Activation::Sigmoid)]).unwrap();
        let x = Matrix::from_rows(&[vec![0.0]]).unwrap();
        let grads = model.backward(&x, &[1]).unwrap();
        assert_eq!(grads.layers.len(), 1);
        assert_eq!(grads.layers[0].weights.get(0, 0), 0.0);
        assert_eq!(grads.layers[0].bias.get(0, 0), -0.5);
    }

    #[test]
    fn backward_hand_case_two_layers() {
        // tiny_net on x = [1, 2], y = 1: p = sigmoid(3), residual
        // r = p - 1, hidden activation 3, relu derivative 1, so
        // dL/dw2 = 3r, dL/db2 = r, dL/dW1 = r * x, dL/db1 = r.
        let model = tiny_net();
        let x = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let grads = model.backward(&x, &[1]).unwrap();
        let r = SIGMOID_3 - 1.0;
        let tol = 1e-15;
        assert!((grads.layers[1].weights.get(0, 0) - 3.0 * r).abs() < tol);
        assert!((grads.layers[1].bias.get(0, 0) - r).abs() < tol);
        assert!((grads.layers[0].weights.get(0, 0) - r).abs() < tol);
        assert!((grads.layers[0].weights.get(0, 1) - 2.0 * r).abs() < tol);
        assert!((grads.layers[0].bias.get(0, 0) - r).abs() < tol);
    }

    /// Central-difference loss derivative for one parameter.
    fn numerical_grad(
        model: &MlpModel,
        x: &Matrix,
        y: &[u8],
        layer: usize,
        bias: bool,
        index: usize,
    ) -> f64 {
        let h = 1e-6;
        let bump = |delta: f64| -> f64 {
            let mut m = model.clone();
            let target = if bias {
                m.layers_mut()[layer].bias.data_mut()
            } else {
                m.layers_mut()[layer].weights.data_mut()
            };
            target[index] += delta;
            bce_loss(&m.forward(x).unwrap(), y).unwrap()
        };
        (bump(h) - bump(-h)) / (2.0 * h)
    }

    fn assert_gradients_match(model: &MlpModel, x: &Matrix, y: &[u8]) {
        let grads = model.backward(x, y).unwrap();
        for (k, g) in grads.layers.iter().enumerate() {
            for (bias, analytic) in [(false, &g.weights), (true, &g.bias)] {
                for idx in 0..analytic.data().len() {
                    let a = analytic.data()[idx];
                    let n = numerical_grad(model, x, y, k, bias, idx);
                    // The floor keeps finite-difference noise on near-zero
                    // gradients from dominating the ratio.
                    let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-4);
                    assert!(
                        rel < 1e-5,
                        "layer {k} {} [{idx}]: analytic {a} vs numerical {n} (rel {rel})",
                        if bias { "bias" } else { "weights" }
                    );
                }
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        use rand::Rng;
        let mut rng = stream_rng(2024, 0);
        for case in 0..6u64 {
            let mut model = init_model((4, 3), 100 + case);
            // Zero biases park dead samples exactly on a relu kink (their
            // whole pre-activation collapses to the bias), where a central
            // difference sees half the one-sided slope. Random offsets move
            // every kink safely outside the finite-difference window.
            for layer in model.layers_mut() {
                for b in layer.bias.data_mut().iter_mut() {
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    *b = sign * rng.random_range(0.05..0.3);
                }
            }
            let rows = 1 + (case as usize % 4);
            let x = Matrix::from_fn(rows, FEATURE_COUNT, |_, _| rng.random_range(-2.0..2.0));
            let y: Vec<u8> = (0..rows).map(|_| u8::from(rng.random_bool(0.5))).collect();
            let (pre, _) = model.forward_trace(&x).unwrap();
            for (k, layer) in model.layers().iter().enumerate() {
                if layer.activation == Activation::Relu {
                    assert!(
                        pre[k].data().iter().all(|&z| z.abs() > 1e-4),
                        "case {case}: a relu pre-activation sits inside the \
                         finite-difference window; reseed the test data"
                    );
                }
            }
            assert_gradients_match(&model, &x, &y);
        }
    }

    #[test]
    fn backward_rejects_mismatched_labels() {
        let model = init_model((4, 3), 0);
        let x = Matrix::zeros(3, FEATURE_COUNT);
        assert!(model.backward(&x, &[1, 0]).is_err());
        assert!(model.backward(&x, &[1, 0, 2]).is_err());
    }

    #[test]
    fn predict_applies_threshold_with_ties_positive() {
        // One input unit straight into the sigmoid: score = sigmoid(x).
        let model = MlpModel::new(vec![layer(&[vec![1.0]], &[0.0], Activation::Sigmoid)]).unwrap();
        let x = Matrix::from_rows(&[vec![-1.0], vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(model.predict(&x, 0.5).unwrap(), vec![0, 1, 1]);
        // sigmoid(0) = 0.5 sits exactly on the default threshold and counts
        // as positive; a higher threshold flips it.
        assert_eq!(model.predict(&x, 0.51).unwrap(), vec![0, 0, 1]);
    }

    #[test]
    fn predict_rejects_degenerate_thresholds() {
        let model = init_model((2, 2), 0);
        let x = Matrix::zeros(1, FEATURE_COUNT);
        for bad in [0.0, 1.0, -0.2, 1.7, f64::NAN] {
            assert!(model.predict(&x, bad).is_err(), "threshold {bad}");
        }
    }

    #[test]
    fn train_config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for (desc, cfg) in [
            ("zero epochs", TrainConfig { epochs: 0, ..Default::default() }),
            ("negative lr", TrainConfig { learning_rate: -0.1, ..Default::default() }),
            ("nan lr", TrainConfig { learning_rate: f64::NAN, ..Default::default() }),
            ("zero batch", TrainConfig { batch_size: 0, ..Default::default() }),
            ("zero hidden", TrainConfig { hidden_dims: (0, 4), ..Default::default() }),
        ] {
            assert!(cfg.validate().is_err(), "{desc} should fail");
        }
        // A zero learning rate is legal; it just freezes the model.
        assert!(TrainConfig { learning_rate: 0.0, ..Default::default() }
            .validate()
            .is_ok());
    }

    #[test]
    fn train_with_zero_learning_rate_is_identity() {
        let data = separable_dataset(12);
        let cfg = TrainConfig {
            epochs: 1,
            learning_rate: 0.0,
            batch_size: 4,
            hidden_dims: (5, 3),
            seed: 13,
        };
        let (model, log) = train(&data, None, &cfg).unwrap();
        assert_eq!(model, init_model((5, 3), 13));
        assert_eq!(log.records.len(), 1);
    }

    #[test]
    fn train_is_deterministic() {
        let data = separable_dataset(20);
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 4,
            hidden_dims: (6, 3),
            seed: 1,
            ..Default::default()
        };
        let (m1, l1) = train(&data, Some(&data), &cfg).unwrap();
        let (m2, l2) = train(&data, Some(&data), &cfg).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(l1, l2);
    }

    #[test]
    fn train_reduces_loss_on_separable_data() {
        let data = separable_dataset(60);
        let cfg = TrainConfig {
            epochs: 30,
            learning_rate: 0.05,
            batch_size: 8,
            hidden_dims: (8, 4),
            seed: 3,
        };
        let (_, log) = train(&data, None, &cfg).unwrap();
        let first = log.records.first().unwrap();
        let last = log.records.last().unwrap();
        assert!(
            last.train_loss < first.train_loss,
            "loss should fall: first {} last {}",
            first.train_loss,
            last.train_loss
        );
        assert!(last.train_accuracy >= 0.9, "got {}", last.train_accuracy);
    }

    #[test]
    fn train_log_records_every_epoch() {
        let data = separable_dataset(10);
        let cfg = TrainConfig {
            epochs: 4,
            batch_size: 3,
            hidden_dims: (3, 2),
            seed: 0,
            ..Default::default()
        };
        let (_, no_val) = train(&data, None, &cfg).unwrap();
        assert_eq!(no_val.records.len(), 4);
        for (i, r) in no_val.records.iter().enumerate() {
            assert_eq!(r.epoch, i + 1);
            assert!(r.val_loss.is_none() && r.val_accuracy.is_none());
            assert!(r.train_loss.is_finite());
            assert!((0.0..=1.0).contains(&r.train_accuracy));
        }
        let (_, with_val) = train(&data, Some(&data), &cfg).unwrap();
        assert!(with_val
            .records
            .iter()
            .all(|r| r.val_loss.is_some() && r.val_accuracy.is_some()));
        // Validating on the training set itself must reproduce the train
        // metrics exactly.
        for r in &with_val.records {
            assert_eq!(r.val_loss.unwrap().to_bits(), r.train_loss.to_bits());
            assert_eq!(
                r.val_accuracy.unwrap().to_bits(),
                r.train_accuracy.to_bits()
            );
        }
    }

    #[test]
    fn train_rejects_unimputed_data() {
        let features = Matrix::zeros(4, FEATURE_COUNT);
        let mut mask = vec![false; 4 * FEATURE_COUNT];
        mask[7] = true;
        let ds = Dataset::new(DataSchema::ckd(), features, vec![0, 1, 0, 1], mask).unwrap();
        let err = train(&ds, None, &TrainConfig::default()).unwrap_err();
        assert!(err.to_string().contains("impute"), "got: {err}");
    }

    #[test]
    fn training_log_csv_layout() {
        let log = TrainingLog {
            records: vec![
                EpochRecord {
                    epoch: 1,
                    train_loss: 0.75,
                    train_accuracy: 0.5,
                    val_loss: Some(0.8),
                    val_accuracy: Some(0.25),
                },
                EpochRecord {
                    epoch: 2,
                    train_loss: 0.5,
                    train_accuracy: 0.75,
                    val_loss: None,
                    val_accuracy: None,
                },
            ],
        };
        let csv = log.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "epoch,train_loss,train_acc,val_loss,val_acc");
        assert_eq!(lines[1], "1,0.75,0.5,0.8,0.25");
        assert_eq!(lines[2], "2,0.5,0.75,,");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        let model = init_model((4, 3), 77);
        model.save(&path).unwrap();
        let back = MlpModel::load(&path).unwrap();
        assert_eq!(back, model);

        // Awkward values (negative, tiny, huge) must survive too.
        let awkward = MlpModel::new(vec![
            layer(
                &[vec![-1.5e-17, 3.0], vec![0.1 + 0.2, -4.0e12]],
                &[5e-324, -0.0],
                Activation::Relu,
            ),
            layer(&[vec![1.0, -1.0]], &[0.25], Activation::Sigmoid),
        ])
        .unwrap();
        let path2 = dir.path().join("awkward.txt");
        awkward.save(&path2).unwrap();
        let back = MlpModel::load(&path2).unwrap();
        let bits = |m: &Matrix| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        for (a, b) in back.layers().iter().zip(awkward.layers()) {
            assert_eq!(bits(&a.weights), bits(&b.weights));
            assert_eq!(bits(&a.bias), bits(&b.bias));
        }
    }

    #[test]
    fn loaded_model_scores_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        let model = init_model((6, 4), 8);
        model.save(&path).unwrap();
        let back = MlpModel::load(&path).unwrap();
        let x = Matrix::from_fn(7, FEATURE_COUNT, |i, j| ((i + 2 * j) % 9) as f64 / 3.0 - 1.0);
        let a = model.forward(&x).unwrap();
        let b = back.forward(&x).unwrap();
        assert_eq!(
            a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn load_rejects_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let model = MlpModel::new(vec![
            layer(&[vec![1.0, 2.0], vec![3.0, 4.0]], &[0.1, 0.2], Activation::Relu),
            layer(&[vec![0.5, -0.5]], &[0.0], Activation::Sigmoid),
        ])
        .unwrap();
        let path = dir.path().join("good.txt");
        model.save(&path).unwrap();
        let good = std::fs::read_to_string(&path).unwrap();

        let cases: Vec<(&str, String)> = vec![
            ("wrong magic", good.replacen("ckdmlp-model", "somethingelse", 1)),
            ("wrong version", good.replacen("v1", "v2", 1)),
            ("bad layer count", good.replacen("\n2\n", "\ntwo\n", 1)),
            ("zero layers", good.replacen("\n2\n", "\n0\n", 1)),
            ("truncated", good.lines().take(4).collect::<Vec<_>>().join("\n")),
            ("trailing content", format!("{good}42\n")),
            ("bad activation", good.replacen("relu", "tanh", 1)),
            ("non-finite weight", good.replacen("0.5 -0.5", "0.5 nan", 1)),
            ("short weights line", good.replacen("1 2 3 4", "1 2 3", 1)),
            (
                "chain mismatch",
                "ckdmlp-model v1\n2\n2 2 relu\n1 2 3 4\n0.1 0.2\n3 1 sigmoid\n0.5 -0.5 0.25\n0\n"
                    .to_string(),
            ),
            ("relu head", good.replacen("2 1 sigmoid", "2 1 relu", 1)),
        ];
        for (desc, text) in cases {
            let bad_path = dir.path().join("bad.txt");
            std::fs::write(&bad_path, &text).unwrap();
            let err = MlpModel::load(&bad_path).unwrap_err();
            assert!(
                matches!(err, Error::Format(_)),
                "{desc}: expected a format error, got {err:?}"
            );
        }
    }

    #[test]
    fn load_missing_file_reports_path() {
        let err = MlpModel::load(Path::new("/nonexistent/model.txt")).unwrap_err();
        assert!(err.to_string().contains("model.txt"));
    }
}
