//! A small fully-connected autoencoder trained with Adam, providing the
//! encoder/decoder pair that the latent-space models plug into. Everything
//! is plain matrix code: training is single-threaded and bit-reproducible
//! for a given seed.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::data::LatentMatrix;
use crate::error::{Error, Result};
use crate::rng::seeded_rng;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const BCE_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative in terms of the activated value.
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Sigmoid => 2,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Activation::Identity),
            1 => Ok(Activation::Relu),
            2 => Ok(Activation::Sigmoid),
            other => Err(Error::DataValidation(format!(
                "unknown activation tag {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    SquaredError,
    BinaryCrossEntropy,
}

/// One dense layer: `a = act(x W^T + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights.t());
        for mut row in z.rows_mut() {
            row += &self.biases;
        }
        z.mapv_inplace(|v| self.activation.apply(v));
        z
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            weight_decay: 1e-3,
            batch_size: 128,
            epochs: 100,
            seed: 0,
            loss: LossKind::SquaredError,
        }
    }
}

/// Encoder/decoder stacks with matching widths.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpAutoencoder {
    encoder: Vec<Layer>,
    decoder: Vec<Layer>,
    input_dim: usize,
    latent_dim: usize,
}

impl MlpAutoencoder {
    /// Fan-in scaled uniform initialization of the default architecture
    /// `input -> hidden -> latent -> hidden -> input`.
    pub fn new_random(
        input_dim: usize,
        hidden_width: usize,
        latent_dim: usize,
        hidden_activation: Activation,
        output_activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 || hidden_width == 0 || latent_dim == 0 {
            return Err(Error::InvalidArgument(
                "all layer widths must be positive".into(),
            ));
        }
        let mut rng = seeded_rng(seed);
        let mut layer = |out: usize, inp: usize, act: Activation| {
            let bound = 1.0 / (inp as f64).sqrt();
            Layer {
                weights: Array2::from_shape_fn((out, inp), |_| {
                    rng.random_range(-bound..bound)
                }),
                biases: Array1::zeros(out),
                activation: act,
            }
        };
        let encoder = vec![
            layer(hidden_width, input_dim, hidden_activation),
            layer(latent_dim, hidden_width, Activation::Identity),
        ];
        let decoder = vec![
            layer(hidden_width, latent_dim, hidden_activation),
            layer(input_dim, hidden_width, output_activation),
        ];
        Self::from_layers(encoder, decoder)
    }

    pub fn from_layers(encoder: Vec<Layer>, decoder: Vec<Layer>) -> Result<Self> {
        if encoder.is_empty() || decoder.is_empty() {
            return Err(Error::InvalidArgument("empty layer stack".into()));
        }
        let mut width = encoder[0].weights.ncols();
        let input_dim = width;
        for l in encoder.iter().chain(decoder.iter()) {
            if l.weights.ncols() != width {
                return Err(Error::DimensionMismatch(format!(
                    "layer expects {} inputs, previous layer produces {width}",
                    l.weights.ncols()
                )));
            }
            if l.weights.nrows() != l.biases.len() {
                return Err(Error::DimensionMismatch(
                    "bias length differs from output width".into(),
                ));
            }
            if l.weights.iter().chain(l.biases.iter()).any(|v| !v.is_finite()) {
                return Err(Error::DataValidation("non-finite parameter".into()));
            }
            width = l.weights.nrows();
        }
        if width != input_dim {
            return Err(Error::DimensionMismatch(format!(
                "decoder produces {width} outputs for {input_dim} inputs"
            )));
        }
        let latent_dim = encoder.last().unwrap().weights.nrows();
        if decoder[0].weights.ncols() != latent_dim {
            return Err(Error::DimensionMismatch(
                "decoder input width differs from the latent width".into(),
            ));
        }
        Ok(Self {
            encoder,
            decoder,
            input_dim,
            latent_dim,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn encoder(&self) -> &[Layer] {
        &self.encoder
    }

    pub fn decoder(&self) -> &[Layer] {
        &self.decoder
    }

    /// Deterministic forward pass through the encoder.
    pub fn encode(&self, x: ArrayView2<f64>) -> Result<LatentMatrix> {
        if x.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "input has {} columns, encoder expects {}",
                x.ncols(),
                self.input_dim
            )));
        }
        let mut a = x.to_owned();
        for l in &self.encoder {
            a = l.forward(&a);
        }
        LatentMatrix::new(a)
    }

    /// Deterministic forward pass through the decoder.
    pub fn decode(&self, y: ArrayView2<f64>) -> Result<Array2<f64>> {
        if y.ncols() != self.latent_dim {
            return Err(Error::DimensionMismatch(format!(
                "latents have {} columns, decoder expects {}",
                y.ncols(),
                self.latent_dim
            )));
        }
        let mut a = y.to_owned();
        for l in &self.decoder {
            a = l.forward(&a);
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericFailure("non-finite decoder output".into()));
        }
        Ok(a)
    }

    fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.encoder.iter().chain(self.decoder.iter())
    }

    fn layers_mut(&mut self) -> Vec<&mut Layer> {
        self.encoder.iter_mut().chain(self.decoder.iter_mut()).collect()
    }

    fn param_vector(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for l in self.layers() {
            v.extend(l.weights.iter());
            v.extend(l.biases.iter());
        }
        v
    }

    fn set_param_vector(&mut self, params: &[f64]) {
        let mut it = params.iter();
        for l in self.layers_mut() {
            for w in l.weights.iter_mut() {
                *w = *it.next().expect("parameter count");
            }
            for b in l.biases.iter_mut() {
                *b = *it.next().expect("parameter count");
            }
        }
        assert!(it.next().is_none(), "parameter count");
    }

    /// Loss and flattened parameter gradients on one batch; the gradient
    /// layout matches [`MlpAutoencoder::param_vector`]. Weight decay is
    /// decoupled and therefore not part of this gradient.
    fn loss_and_gradients(&self, batch: &Array2<f64>, loss: LossKind) -> (f64, Vec<f64>) {
        let stack: Vec<&Layer> = self.layers().collect();
        // Forward, keeping every activation.
        let mut acts: Vec<Array2<f64>> = vec![batch.to_owned()];
        for l in &stack {
            let next = l.forward(acts.last().unwrap());
            acts.push(next);
        }
        let output = acts.last().unwrap();
        let b = batch.nrows() as f64;
        let dims = batch.ncols() as f64;
        let scale = 1.0 / (b * dims);

        let mut loss_value = 0.0;
        let mut delta = Array2::<f64>::zeros(output.raw_dim());
        match loss {
            LossKind::SquaredError => {
                for ((i, j), &a) in output.indexed_iter() {
                    let diff = a - batch[[i, j]];
                    loss_value += diff * diff;
                    delta[[i, j]] = 2.0 * diff * scale;
                }
            }
            LossKind::BinaryCrossEntropy => {
                for ((i, j), &a) in output.indexed_iter() {
                    let t = batch[[i, j]];
                    let c = a.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                    loss_value -= t * c.ln() + (1.0 - t) * (1.0 - c).ln();
                    if a > BCE_CLAMP && a < 1.0 - BCE_CLAMP {
                        delta[[i, j]] = (c - t) / (c * (1.0 - c)) * scale;
                    }
                }
            }
        }
        loss_value *= scale;

        // Backward pass.
        let mut grads: Vec<(Array2<f64>, Array1<f64>)> = Vec::with_capacity(stack.len());
        for (idx, l) in stack.iter().enumerate().rev() {
            let a_out = &acts[idx + 1];
            let a_in = &acts[idx];
            let mut dz = delta;
            for ((i, j), v) in dz.indexed_iter_mut() {
                *v *= l.activation.derivative(a_out[[i, j]]);
            }
            let dw = dz.t().dot(a_in);
            let db = dz.sum_axis(Axis(0));
            delta = dz.dot(&l.weights);
            grads.push((dw, db));
        }
        grads.reverse();

        let mut flat = Vec::new();
        for (dw, db) in grads {
            flat.extend(dw.iter());
            flat.extend(db.iter());
        }
        (loss_value, flat)
    }

    /// Largest relative disagreement between analytic gradients and
    /// central finite differences (step 1e-5) over all parameters.
    pub fn gradient_check(&self, batch: &Array2<f64>, loss: LossKind) -> Result<f64> {
        if batch.nrows() == 0 || batch.nrows() > 8 {
            return Err(Error::InvalidArgument(
                "gradient check expects a batch of 1 to 8 rows".into(),
            ));
        }
        if batch.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "batch has {} columns, model expects {}",
                batch.ncols(),
                self.input_dim
            )));
        }
        let (_, analytic) = self.loss_and_gradients(batch, loss);
        let params = self.param_vector();
        let mut probe = self.clone();
        let step = 1e-5;
        let mut worst: f64 = 0.0;
        for k in 0..params.len() {
            let mut shifted = params.clone();
            shifted[k] = params[k] + step;
            probe.set_param_vector(&shifted);
            let (up, _) = probe.loss_and_gradients(batch, loss);
            shifted[k] = params[k] - step;
            probe.set_param_vector(&shifted);
            let (down, _) = probe.loss_and_gradients(batch, loss);
            shifted[k] = params[k];
            let fd = (up - down) / (2.0 * step);
            let denom = (analytic[k].abs() + fd.abs()).max(1e-8);
            worst = worst.max((analytic[k] - fd).abs() / denom);
        }
        Ok(worst)
    }
}

/// Trains a fresh autoencoder on `data` with minibatch Adam and decoupled
/// weight decay; the returned history holds one mean loss per epoch.
///
/// With `BinaryCrossEntropy` the output layer is logistic, otherwise
/// linear; hidden layers are rectifiers.
pub fn train(
    data: ArrayView2<f64>,
    latent_dim: usize,
    hidden_width: usize,
    config: &TrainConfig,
) -> Result<(MlpAutoencoder, Vec<f64>)> {
    let (n, input_dim) = (data.nrows(), data.ncols());
    if n == 0 || input_dim == 0 {
        return Err(Error::DataValidation("empty training data".into()));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::DataValidation("non-finite training value".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    if config.batch_size > n {
        return Err(Error::InvalidArgument(format!(
            "batch size {} exceeds the sample count {n}",
            config.batch_size
        )));
    }
    if !(config.learning_rate.is_finite() && config.learning_rate > 0.0) {
        return Err(Error::InvalidArgument("learning rate must be positive".into()));
    }
    if !(config.weight_decay.is_finite() && config.weight_decay >= 0.0) {
        return Err(Error::InvalidArgument("weight decay must be nonnegative".into()));
    }
    if config.epochs == 0 {
        return Err(Error::InvalidArgument("need at least one epoch".into()));
    }

    let output_activation = match config.loss {
        LossKind::SquaredError => Activation::Identity,
        LossKind::BinaryCrossEntropy => Activation::Sigmoid,
    };
    let mut model = MlpAutoencoder::new_random(
        input_dim,
        hidden_width,
        latent_dim,
        Activation::Relu,
        output_activation,
        config.seed,
    )?;
    train_in_place(&mut model, data, config).map(|history| (model, history))
}

/// Training loop over an existing model (the seed only drives batching
/// here; initialization happened at construction).
pub fn train_in_place(
    model: &mut MlpAutoencoder,
    data: ArrayView2<f64>,
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    use rand::seq::SliceRandom;
    let n = data.nrows();
    let mut rng = seeded_rng(config.seed.wrapping_add(1));
    let mut perm: Vec<usize> = (0..n).collect();

    let mut adam_m: Vec<f64> = vec![0.0; model.param_vector().len()];
    let mut adam_v: Vec<f64> = vec![0.0; adam_m.len()];
    let mut step = 0u64;
    let mut history = Vec::with_capacity(config.epochs);

    // Decoupled weight decay applies to weights only; remember which
    // flattened slots are biases.
    let mut is_bias = Vec::with_capacity(adam_m.len());
    for l in model.layers() {
        is_bias.extend(std::iter::repeat_n(false, l.weights.len()));
        is_bias.extend(std::iter::repeat_n(true, l.biases.len()));
    }

    for epoch in 0..config.epochs {
        perm.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_idx, chunk) in perm.chunks(config.batch_size).enumerate() {
            let mut batch = Array2::<f64>::zeros((chunk.len(), data.ncols()));
            for (k, &i) in chunk.iter().enumerate() {
                batch.row_mut(k).assign(&data.row(i));
            }
            let (loss, grads) = model.loss_and_gradients(&batch, config.loss);
            if !loss.is_finite() {
                return Err(Error::NumericFailure(format!(
                    "non-finite loss at epoch {}, batch {}",
                    epoch + 1,
                    batch_idx + 1
                )));
            }
            epoch_loss += loss * chunk.len() as f64;

            step += 1;
            let mut params = model.param_vector();
            let bias1 = 1.0 - ADAM_BETA1.powi(step as i32);
            let bias2 = 1.0 - ADAM_BETA2.powi(step as i32);
            for k in 0..params.len() {
                adam_m[k] = ADAM_BETA1 * adam_m[k] + (1.0 - ADAM_BETA1) * grads[k];
                adam_v[k] = ADAM_BETA2 * adam_v[k] + (1.0 - ADAM_BETA2) * grads[k] * grads[k];
                let m_hat = adam_m[k] / bias1;
                let v_hat = adam_v[k] / bias2;
                params[k] -= config.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPS);
                if !is_bias[k] {
                    params[k] -= config.learning_rate * config.weight_decay * params[k];
                }
            }
            model.set_param_vector(&params);
        }
        history.push(epoch_loss / n as f64);
    }
    Ok(history)
}
