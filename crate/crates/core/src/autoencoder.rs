//! Dense symmetric autoencoder used as a training-set anomaly filter.
//!
//! The encoder maps `layer_widths[0]` inputs down to the bottleneck
//! `layer_widths[k]`; the decoder mirrors it back to the input width. Inputs
//! are min-max scaled with a table captured at training time. The anomaly
//! score of a row is its mean squared reconstruction error, and rows scoring
//! strictly above a quantile-derived threshold are filtered out.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label, MinMaxTable};
use crate::seed::{self, derive_seed};
use crate::{Error, Result, SCHEMA_VERSION};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Weights are drawn from `U(-a, a)` with `a = sqrt(INIT_SCALE / fan_in)`.
pub const INIT_SCALE: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingPopulation {
    AllRows,
    /// Only rows of the more frequent class.
    MajorityClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeConfig {
    /// Encoder widths, input first and bottleneck last. Non-increasing.
    pub layer_widths: Vec<usize>,
    /// One activation per layer: encoder layers first, then decoder layers.
    pub activations: Vec<Activation>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub filter_quantile: f64,
    pub training_population: TrainingPopulation,
}

impl AeConfig {
    /// Widths `[input, ceil(input/2), ceil(input/4)]` (repeated widths dropped),
    /// rectifier hidden layers and an identity output; Adam at learning rate
    /// 1e-3, batch 32, 100 epochs, quantile 0.95, majority-class training.
    pub fn default_for(input_width: usize) -> Self {
        let mut widths = vec![input_width];
        for w in [input_width.div_ceil(2), input_width.div_ceil(4)] {
            if w < *widths.last().unwrap() && w > 0 {
                widths.push(w);
            }
        }
        if widths.len() == 1 {
            widths.push(input_width);
        }
        Self::with_widths(widths)
    }

    /// Default hyperparameters around explicit encoder widths.
    pub fn with_widths(layer_widths: Vec<usize>) -> Self {
        let activations = default_activations(layer_widths.len().saturating_sub(1));
        AeConfig {
            layer_widths,
            activations,
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: Optimizer::Adam,
            seed: 0,
            filter_quantile: 0.95,
            training_population: TrainingPopulation::MajorityClass,
        }
    }

    pub fn n_layers(&self) -> usize {
        2 * self.layer_widths.len().saturating_sub(1)
    }

    /// `(inputs, outputs)` of every layer, encoder then mirrored decoder.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let w = &self.layer_widths;
        let encoder = w.windows(2).map(|p| (p[0], p[1]));
        let decoder = w.windows(2).rev().map(|p| (p[1], p[0]));
        encoder.chain(decoder).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidParameter(msg));
        if self.layer_widths.len() < 2 {
            return invalid("autoencoder needs an input width and a bottleneck width".into());
        }
        if self.layer_widths.contains(&0) {
            return invalid("layer widths must be positive".into());
        }
        if self.layer_widths.windows(2).any(|p| p[1] > p[0]) {
            return invalid(format!(
                "encoder widths must not increase toward the bottleneck: {:?}",
                self.layer_widths
            ));
        }
        if self.activations.len() != self.n_layers() {
            return invalid(format!(
                "{} activations given for {} layers",
                self.activations.len(),
                self.n_layers()
            ));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return invalid("epochs and batch size must be positive".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return invalid(format!("learning rate {} is not valid", self.learning_rate));
        }
        if !(self.filter_quantile > 0.0 && self.filter_quantile < 1.0) {
            return invalid(format!(
                "filter quantile must lie strictly between 0 and 1, got {}",
                self.filter_quantile
            ));
        }
        Ok(())
    }
}

/// Rectifier everywhere except an identity output layer.
pub fn default_activations(encoder_layers: usize) -> Vec<Activation> {
    let n = 2 * encoder_layers;
    (0..n)
        .map(|i| {
            if i + 1 == n {
                Activation::Identity
            } else {
                Activation::Relu
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    fn forward(&self, input: &[f64], pre: &mut Vec<f64>, out: &mut Vec<f64>) {
        pre.clear();
        out.clear();
        for (o, row) in self.weights.chunks_exact(self.inputs).enumerate() {
            let z = self.biases[o] + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
            pre.push(z);
            out.push(self.activation.apply(z));
        }
    }

    fn n_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-row loss of every epoch, measured with the weights in effect
    /// when each batch was processed.
    pub epoch_losses: Vec<f64>,
    pub threshold: Option<f64>,
    pub flagged_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderModel {
    pub schema_version: u32,
    pub config: AeConfig,
    pub layers: Vec<DenseLayer>,
    pub normalization: Option<MinMaxTable>,
    pub threshold: Option<f64>,
}

/// Fresh model with fan-in scaled uniform weights and zero biases.
pub fn ae_init(config: &AeConfig, input_width: usize) -> Result<AutoencoderModel> {
    config.validate()?;
    if config.layer_widths[0] != input_width {
        return Err(Error::ColumnCount {
            expected: config.layer_widths[0],
            found: input_width,
        });
    }
    let mut rng = seed::rng(derive_seed(config.seed, 0));
    let layers = config
        .layer_shapes()
        .into_iter()
        .zip(&config.activations)
        .map(|((inputs, outputs), &activation)| {
            let limit = (INIT_SCALE / inputs as f64).sqrt();
            DenseLayer {
                inputs,
                outputs,
                weights: (0..inputs * outputs)
                    .map(|_| rng.gen_range(-limit..limit))
                    .collect(),
                biases: vec![0.0; outputs],
                activation,
            }
        })
        .collect();
    Ok(AutoencoderModel {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        layers,
        normalization: None,
        threshold: None,
    })
}

/// Per-layer activations kept for backpropagation.
struct Trace {
    /// `outputs[0]` is the input; `outputs[l + 1]` is layer `l`'s output.
    outputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl AutoencoderModel {
    pub fn input_width(&self) -> usize {
        self.config.layer_widths[0]
    }

    pub fn is_trained(&self) -> bool {
        self.normalization.is_some()
    }

    /// Input-side widths of the decoder, bottleneck first.
    pub fn decoder_widths(&self) -> Vec<usize> {
        self.config.layer_widths.iter().rev().copied().collect()
    }

    fn check_width(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_width() {
            return Err(Error::ColumnCount {
                expected: self.input_width(),
                found: x.len(),
            });
        }
        Ok(())
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let mut outputs = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        outputs.push(x.to_vec());
        for layer in &self.layers {
            let (mut z, mut a) = (Vec::new(), Vec::new());
            layer.forward(outputs.last().unwrap(), &mut z, &mut a);
            pre.push(z);
            outputs.push(a);
        }
        Trace { outputs, pre }
    }

    /// Latent code and reconstruction of an already-scaled row.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_width(x)?;
        let mut trace = self.trace(x);
        let encoder_layers = self.layers.len() / 2;
        let reconstruction = trace.outputs.pop().unwrap();
        let latent = trace.outputs.swap_remove(encoder_layers);
        Ok((latent, reconstruction))
    }

    /// Scales a raw row with the fit-time table; rows pass through unchanged
    /// before training.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        match &self.normalization {
            Some(table) => table.apply_row(x),
            None => x.to_vec(),
        }
    }

    /// Mean squared reconstruction error of an already-scaled row.
    pub fn scaled_reconstruction_error(&self, x: &[f64]) -> Result<f64> {
        let (_, reconstruction) = self.forward(x)?;
        Ok(mean_squared_error(x, &reconstruction))
    }

    /// Mean squared reconstruction error of a raw row.
    pub fn reconstruction_error(&self, x: &[f64]) -> Result<f64> {
        self.check_width(x)?;
        self.scaled_reconstruction_error(&self.normalize(x))
    }

    pub fn reconstruction_errors(&self, dataset: &Dataset) -> Result<Vec<f64>> {
        dataset
            .rows()
            .map(|r| self.reconstruction_error(r))
            .collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::n_params).sum()
    }

    /// All parameters, layer by layer: weights (row-major) then biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.biases);
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::LengthMismatch {
                expected: self.n_params(),
                found: params.len(),
            });
        }
        let mut rest = params;
        for layer in &mut self.layers {
            let (w, tail) = rest.split_at(layer.weights.len());
            layer.weights.copy_from_slice(w);
            let (b, tail) = tail.split_at(layer.biases.len());
            layer.biases.copy_from_slice(b);
            rest = tail;
        }
        Ok(())
    }

    /// Mean over rows of the per-row mean squared error, for scaled rows.
    pub fn batch_loss(&self, rows: &[Vec<f64>]) -> Result<f64> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut total = 0.0;
        for row in rows {
            total += self.scaled_reconstruction_error(row)?;
        }
        Ok(total / rows.len() as f64)
    }

    /// [`batch_loss`](Self::batch_loss) and its gradient, laid out like
    /// [`parameters`](Self::parameters).
    pub fn loss_gradient(&self, rows: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for row in rows {
            self.check_width(row)?;
        }
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let (losses, grad) = self.backprop(&refs);
        Ok((losses.iter().sum::<f64>() / rows.len() as f64, grad))
    }

    /// Per-row losses and the gradient of their mean.
    fn backprop(&self, rows: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
        let mut grad = vec![0.0; self.n_params()];
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |acc, l| {
                let start = *acc;
                *acc += l.n_params();
                Some(start)
            })
            .collect();
        let batch = rows.len() as f64;
        let width = self.input_width() as f64;
        let mut losses = Vec::with_capacity(rows.len());

        for x in rows {
            let trace = self.trace(x);
            let output = trace.outputs.last().unwrap();
            losses.push(mean_squared_error(x, output));

            // d(loss)/d(output), loss being the batch mean of per-row MSE.
            let mut delta: Vec<f64> = output
                .iter()
                .zip(x.iter())
                .map(|(o, t)| 2.0 * (o - t) / (width * batch))
                .collect();
            for (l, layer) in self.layers.iter().enumerate().rev() {
                for (k, d) in delta.iter_mut().enumerate() {
                    *d *= layer
                        .activation
                        .derivative(trace.pre[l][k], trace.outputs[l + 1][k]);
                }
                let input = &trace.outputs[l];
                let base = offsets[l];
                let (gw, gb) =
                    grad[base..base + layer.n_params()].split_at_mut(layer.weights.len());
                for (o, &d) in delta.iter().enumerate() {
                    gb[o] += d;
                    for (g, &a) in gw[o * layer.inputs..(o + 1) * layer.inputs]
                        .iter_mut()
                        .zip(input)
                    {
                        *g += d * a;
                    }
                }
                if l > 0 {
                    let mut next = vec![0.0; layer.inputs];
                    for (o, &d) in delta.iter().enumerate() {
                        let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                        for (n, &w) in next.iter_mut().zip(row) {
                            *n += w * d;
                        }
                    }
                    delta = next;
                }
            }
        }
        (losses, grad)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let model: AutoencoderModel = serde_json::from_str(json)?;
        if model.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: model.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        model.config.validate()?;
        let shapes = model.config.layer_shapes();
        let consistent = shapes.len() == model.layers.len()
            && shapes.iter().zip(&model.layers).all(|(&(i, o), l)| {
                l.inputs == i && l.outputs == o && l.weights.len() == i * o && l.biases.len() == o
            });
        if !consistent {
            return Err(Error::FeatureMismatch(
                "layer shapes do not match the configured widths".into(),
            ));
        }
        Ok(model)
    }
}

fn mean_squared_error(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64
}

pub fn ae_forward(model: &AutoencoderModel, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    model.forward(x)
}

pub fn reconstruction_error(model: &AutoencoderModel, x: &[f64]) -> Result<f64> {
    model.reconstruction_error(x)
}

/// Row indices the autoencoder trains and fits its threshold on.
pub fn training_rows(dataset: &Dataset, population: TrainingPopulation) -> Vec<usize> {
    match population {
        TrainingPopulation::AllRows => (0..dataset.n_rows()).collect(),
        TrainingPopulation::MajorityClass => {
            let (neg, pos) = dataset.class_counts();
            let majority = if pos > neg {
                Label::Positive
            } else {
                Label::Negative
            };
            (0..dataset.n_rows())
                .filter(|&i| dataset.label(i) == majority)
                .collect()
        }
    }
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

/// Trains on the configured population: fits the scaling table, then runs
/// `epochs` passes of shuffled mini-batches.
pub fn ae_train(model: &mut AutoencoderModel, dataset: &Dataset) -> Result<TrainReport> {
    if dataset.n_features() != model.input_width() {
        return Err(Error::ColumnCount {
            expected: model.input_width(),
            found: dataset.n_features(),
        });
    }
    let population = training_rows(dataset, model.config.training_population);
    if population.is_empty() {
        return Err(Error::EmptyTrainingPopulation);
    }
    let subset = dataset.select_rows(&population);
    let table = MinMaxTable::fit(&subset);
    let rows: Vec<Vec<f64>> = subset.rows().map(|r| table.apply_row(r)).collect();
    model.normalization = Some(table);
    model.threshold = None;

    let config = model.config.clone();
    let mut rng = seed::rng(derive_seed(config.seed, 1));
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut adam = AdamState {
        m: vec![0.0; model.n_params()],
        v: vec![0.0; model.n_params()],
        step: 0,
    };
    let mut row_losses = vec![0.0; rows.len()];
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let refs: Vec<&[f64]> = batch.iter().map(|&i| rows[i].as_slice()).collect();
            let (losses, grad) = model.backprop(&refs);
            for (&i, loss) in batch.iter().zip(losses) {
                row_losses[i] = loss;
            }
            apply_update(model, &grad, &config, &mut adam);
        }
        // Summed in row order so the value does not depend on the shuffle.
        let loss = row_losses.iter().sum::<f64>() / rows.len() as f64;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        epoch_losses.push(loss);
    }

    Ok(TrainReport {
        epoch_losses,
        threshold: None,
        flagged_rows: Vec::new(),
    })
}

fn apply_update(
    model: &mut AutoencoderModel,
    grad: &[f64],
    config: &AeConfig,
    adam: &mut AdamState,
) {
    let lr = config.learning_rate;
    let mut k = 0;
    let step = match config.optimizer {
        Optimizer::Sgd => None,
        Optimizer::Adam => {
            adam.step += 1;
            Some((
                1.0 - ADAM_BETA1.powi(adam.step),
                1.0 - ADAM_BETA2.powi(adam.step),
            ))
        }
    };
    for layer in &mut model.layers {
        for p in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
            let g = grad[k];
            match step {
                None => *p -= lr * g,
                Some((c1, c2)) => {
                    adam.m[k] = ADAM_BETA1 * adam.m[k] + (1.0 - ADAM_BETA1) * g;
                    adam.v[k] = ADAM_BETA2 * adam.v[k] + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = adam.m[k] / c1;
                    let v_hat = adam.v[k] / c2;
                    *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
                }
            }
            k += 1;
        }
    }
}

/// Empirical quantile, lower convention: the sorted value at
/// `floor(q * (n - 1))`. A 1e-9 slack absorbs products such as
/// `0.29 * 100 = 28.999999999999996`.
pub fn lower_quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let position = (q * (sorted.len() - 1) as f64 + 1e-9).floor() as usize;
    sorted[position.min(sorted.len() - 1)]
}

/// Sets the threshold to the `filter_quantile` quantile of the reconstruction
/// errors of the training population of `dataset`.
pub fn fit_threshold(model: &mut AutoencoderModel, dataset: &Dataset) -> Result<f64> {
    if !model.is_trained() {
        return Err(Error::Untrained);
    }
    let population = training_rows(dataset, model.config.training_population);
    if population.is_empty() {
        return Err(Error::EmptyTrainingPopulation);
    }
    let errors = population
        .iter()
        .map(|&i| model.reconstruction_error(dataset.row(i)))
        .collect::<Result<Vec<_>>>()?;
    let threshold = lower_quantile(&errors, model.config.filter_quantile);
    model.threshold = Some(threshold);
    Ok(threshold)
}

/// Drops rows whose reconstruction error is strictly above the threshold.
/// Returns the surviving rows (order kept) and the removed row indices.
pub fn filter_dataset(
    model: &AutoencoderModel,
    dataset: &Dataset,
) -> Result<(Dataset, Vec<usize>)> {
    let threshold = model.threshold.ok_or(Error::NoThreshold)?;
    let errors = model.reconstruction_errors(dataset)?;
    let (kept, flagged): (Vec<usize>, Vec<usize>) = (0..dataset.n_rows())
        .partition(|&i| errors[i].partial_cmp(&threshold) != Some(std::cmp::Ordering::Greater));
    let filtered = dataset.select_rows(&kept);
    let (neg_before, pos_before) = dataset.class_counts();
    let (neg, pos) = filtered.class_counts();
    if pos_before > 0 && pos == 0 {
        return Err(Error::FilterRemovesClass("positive"));
    }
    if neg_before > 0 && neg == 0 {
        return Err(Error::FilterRemovesClass("negative"));
    }
    Ok((filtered, flagged))
}
