//! Stacked sparse autoencoders with a softmax head.
//!
//! Training is greedy: a first tied-weight sparse autoencoder learns a hidden
//! representation of the segment vectors, a second one compresses it further,
//! a softmax layer maps the result to writer classes, and (optionally) the
//! stacked encoders plus softmax are fine-tuned jointly. Everything runs
//! full-batch gradient descent with momentum, seeded and fully deterministic:
//! same seed, data, and config give bit-identical weights.
//!
//! The autoencoder objective is mean reconstruction error plus an L2 weight
//! penalty plus a KL sparsity penalty that pulls every hidden unit's mean
//! activation toward a target proportion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    LogisticSigmoid,
    Softmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// out × in, row-major.
    pub weights: Mat,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl DenseLayer {
    pub fn out_dim(&self) -> usize {
        self.weights.rows
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols
    }

    /// Applies the layer to one vector.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.in_dim(),
                got: x.len(),
            });
        }
        let mut out = Vec::with_capacity(self.out_dim());
        for r in 0..self.out_dim() {
            let row = self.weights.row(r);
            let mut acc = self.bias[r];
            for (w, v) in row.iter().zip(x.iter()) {
                acc += w * v;
            }
            out.push(acc);
        }
        match self.activation {
            Activation::LogisticSigmoid => {
                for v in &mut out {
                    *v = sigmoid(*v);
                }
            }
            Activation::Softmax => softmax_in_place(&mut out),
        }
        Ok(out)
    }

    /// Applies the layer to every row of `x`.
    pub fn forward_batch(&self, x: &Mat) -> Mat {
        let mut z = x.matmul_t(&self.weights);
        z.add_row_vector(&self.bias);
        match self.activation {
            Activation::LogisticSigmoid => z.map_inplace(sigmoid),
            Activation::Softmax => {
                for r in 0..z.rows {
                    let row = &mut z.data[r * z.cols..(r + 1) * z.cols];
                    softmax_slice(row);
                }
            }
        }
        z
    }
}

fn softmax_in_place(v: &mut Vec<f64>) {
    softmax_slice(v.as_mut_slice());
}

fn softmax_slice(row: &mut [f64]) {
    let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Seeded uniform init in ±√(6 / (fan_in + fan_out)).
pub fn init_weights(out_dim: usize, in_dim: usize, rng: &mut ChaCha20Rng) -> Mat {
    let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
    let mut m = Mat::zeros(out_dim, in_dim);
    for v in &mut m.data {
        *v = limit * (2.0 * rng.gen::<f64>() - 1.0);
    }
    m
}

// ---------------------------------------------------------------------------
// Sparse autoencoder
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderHyperparams {
    pub hidden: usize,
    pub max_epochs: usize,
    pub l2_weight: f64,
    pub sparsity_weight: f64,
    /// Target mean activation of each hidden unit, in (0, 1).
    pub sparsity_proportion: f64,
}

/// Tied-weight sparse autoencoder: the decoder weight matrix is always the
/// transpose of the encoder's, so only one matrix exists.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseAutoencoder {
    pub weights: Mat,
    pub encoder_bias: Vec<f64>,
    pub decoder_bias: Vec<f64>,
    pub hyperparams: AutoencoderHyperparams,
    pub loss_per_epoch: Vec<f64>,
}

impl SparseAutoencoder {
    pub fn encoder_layer(&self) -> DenseLayer {
        DenseLayer {
            weights: self.weights.clone(),
            bias: self.encoder_bias.clone(),
            activation: Activation::LogisticSigmoid,
        }
    }
}

/// Loss of the tied autoencoder on `data` (rows are samples).
pub fn autoencoder_loss(
    weights: &Mat,
    encoder_bias: &[f64],
    decoder_bias: &[f64],
    data: &Mat,
    hp: &AutoencoderHyperparams,
) -> f64 {
    let (loss, _) = autoencoder_forward(weights, encoder_bias, decoder_bias, data, hp);
    loss
}

struct AeForward {
    hidden: Mat,
    output: Mat,
    mean_activation: Vec<f64>,
}

fn autoencoder_forward(
    weights: &Mat,
    encoder_bias: &[f64],
    decoder_bias: &[f64],
    data: &Mat,
    hp: &AutoencoderHyperparams,
) -> (f64, AeForward) {
    let m = data.rows as f64;
    let mut hidden = data.matmul_t(weights);
    hidden.add_row_vector(encoder_bias);
    hidden.map_inplace(sigmoid);

    let mut output = hidden.matmul(weights);
    output.add_row_vector(decoder_bias);
    output.map_inplace(sigmoid);

    let mut recon = 0.0;
    for (y, x) in output.data.iter().zip(data.data.iter()) {
        let d = y - x;
        recon += d * d;
    }
    recon *= 0.5 / m;

    let l2 = 0.5 * hp.l2_weight * weights.frobenius_sq();

    let rho = hp.sparsity_proportion;
    let mean_activation: Vec<f64> = hidden
        .col_means()
        .into_iter()
        .map(|a| a.clamp(1e-12, 1.0 - 1e-12))
        .collect();
    let kl: f64 = mean_activation
        .iter()
        .map(|&a| rho * (rho / a).ln() + (1.0 - rho) * ((1.0 - rho) / (1.0 - a)).ln())
        .sum();

    (
        recon + l2 + hp.sparsity_weight * kl,
        AeForward {
            hidden,
            output,
            mean_activation,
        },
    )
}

/// Loss and analytic gradients of the tied autoencoder.
pub fn autoencoder_loss_grad(
    weights: &Mat,
    encoder_bias: &[f64],
    decoder_bias: &[f64],
    data: &Mat,
    hp: &AutoencoderHyperparams,
) -> (f64, Mat, Vec<f64>, Vec<f64>) {
    let m = data.rows as f64;
    let (loss, fwd) = autoencoder_forward(weights, encoder_bias, decoder_bias, data, hp);
    let rho = hp.sparsity_proportion;

    // Output delta: d(recon)/d(z2) = (1/m)(y − x) ⊙ y(1 − y).
    let mut d_out = Mat::zeros(fwd.output.rows, fwd.output.cols);
    for i in 0..d_out.data.len() {
        let y = fwd.output.data[i];
        d_out.data[i] = (y - data.data[i]) / m * y * (1.0 - y);
    }

    // Hidden delta: back through the decoder plus the sparsity term, then
    // through the hidden sigmoid.
    let sparsity_push: Vec<f64> = fwd
        .mean_activation
        .iter()
        .map(|&a| hp.sparsity_weight * (-rho / a + (1.0 - rho) / (1.0 - a)) / m)
        .collect();
    let mut d_hidden = d_out.matmul_t(weights);
    for r in 0..d_hidden.rows {
        let row = &mut d_hidden.data[r * d_hidden.cols..(r + 1) * d_hidden.cols];
        for (v, s) in row.iter_mut().zip(&sparsity_push) {
            *v += s;
        }
    }
    for i in 0..d_hidden.data.len() {
        let h = fwd.hidden.data[i];
        d_hidden.data[i] *= h * (1.0 - h);
    }

    // Tied weights collect both uses: encoder (dZ1ᵀ X) and decoder (Hᵀ dY).
    let mut d_weights = d_hidden.t_matmul(data);
    let dec = fwd.hidden.t_matmul(&d_out);
    for (w, d) in d_weights.data.iter_mut().zip(dec.data.iter()) {
        *w += d;
    }
    for (w, orig) in d_weights.data.iter_mut().zip(weights.data.iter()) {
        *w += hp.l2_weight * orig;
    }

    (loss, d_weights, d_hidden.col_sums(), d_out.col_sums())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub momentum: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 0.01,
            momentum: 0.9,
        }
    }
}

/// Trains one sparse autoencoder by full-batch gradient descent with
/// momentum. Inputs are expected min-max scaled to [0, 1].
pub fn train_autoencoder(
    data: &Mat,
    hp: AutoencoderHyperparams,
    opt: &OptimizerConfig,
    rng: &mut ChaCha20Rng,
) -> Result<SparseAutoencoder> {
    if data.rows < 2 {
        return Err(Error::InvalidConfig {
            detail: format!("autoencoder needs at least 2 samples, got {}", data.rows),
        });
    }
    let weights = init_weights(hp.hidden, data.cols, rng);
    let encoder_bias = vec![0.0; hp.hidden];
    let decoder_bias = vec![0.0; data.cols];

    let mut params = vec![weights.data, encoder_bias, decoder_bias];
    let losses = descend(
        &mut params,
        hp.max_epochs,
        opt,
        |p| {
            let w = Mat {
                rows: hp.hidden,
                cols: data.cols,
                data: p[0].clone(),
            };
            let (loss, gw, gbe, gbd) = autoencoder_loss_grad(&w, &p[1], &p[2], data, &hp);
            (loss, vec![gw.data, gbe, gbd])
        },
        |p| {
            let w = Mat {
                rows: hp.hidden,
                cols: data.cols,
                data: p[0].clone(),
            };
            autoencoder_loss(&w, &p[1], &p[2], data, &hp)
        },
    )?;

    let decoder_bias = params.pop().unwrap();
    let encoder_bias = params.pop().unwrap();
    let weights = Mat {
        rows: hp.hidden,
        cols: data.cols,
        data: params.pop().unwrap(),
    };
    Ok(SparseAutoencoder {
        weights,
        encoder_bias,
        decoder_bias,
        hyperparams: hp,
        loss_per_epoch: losses,
    })
}

/// Guarded full-batch descent: the usual momentum update, but an epoch that
/// would raise the loss restarts the momentum and backtracks the plain
/// gradient step until the loss no longer increases. Keeps the recorded loss
/// sequence effectively non-increasing while leaving ordinary momentum
/// behavior untouched on descent.
fn descend(
    params: &mut Vec<Vec<f64>>,
    epochs: usize,
    opt: &OptimizerConfig,
    mut loss_grad: impl FnMut(&[Vec<f64>]) -> (f64, Vec<Vec<f64>>),
    mut loss_only: impl FnMut(&[Vec<f64>]) -> f64,
) -> Result<Vec<f64>> {
    let mut velocity: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.len()]).collect();
    let mut losses = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let (loss, grads) = loss_grad(params);
        if !loss.is_finite() {
            return Err(Error::NanLoss { epoch });
        }
        losses.push(loss);

        for (v, g) in velocity.iter_mut().zip(grads.iter()) {
            for i in 0..g.len() {
                v[i] = opt.momentum * v[i] - opt.learning_rate * g[i];
            }
        }
        let mut trial: Vec<Vec<f64>> = params
            .iter()
            .zip(&velocity)
            .map(|(p, v)| p.iter().zip(v).map(|(a, b)| a + b).collect())
            .collect();

        if loss_only(&trial) > loss {
            // Momentum restart with a backtracked plain gradient step.
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..12 {
                scale *= 0.5;
                trial = params
                    .iter()
                    .zip(&grads)
                    .map(|(p, g)| {
                        p.iter()
                            .zip(g.iter())
                            .map(|(a, b)| a - opt.learning_rate * scale * b)
                            .collect()
                    })
                    .collect();
                if loss_only(&trial) <= loss {
                    accepted = true;
                    break;
                }
            }
            for v in &mut velocity {
                v.iter_mut().for_each(|x| *x = 0.0);
            }
            if accepted {
                *params = trial;
            }
        } else {
            *params = trial;
        }
    }
    Ok(losses)
}

// ---------------------------------------------------------------------------
// Softmax classifier
// ---------------------------------------------------------------------------

/// Cross-entropy loss and gradients of a softmax layer on encoded features.
pub fn softmax_loss_grad(
    weights: &Mat,
    bias: &[f64],
    features: &Mat,
    labels: &[usize],
) -> (f64, Mat, Vec<f64>) {
    let m = features.rows as f64;
    let layer = DenseLayer {
        weights: weights.clone(),
        bias: bias.to_vec(),
        activation: Activation::Softmax,
    };
    let probs = layer.forward_batch(features);
    let mut loss = 0.0;
    let mut delta = probs;
    for (i, &label) in labels.iter().enumerate() {
        let p = delta.at(i, label).max(1e-300);
        loss -= p.ln();
        *delta.at_mut(i, label) -= 1.0;
    }
    loss /= m;
    for v in &mut delta.data {
        *v /= m;
    }
    let grad_w = delta.t_matmul(features);
    (loss, grad_w, delta.col_sums())
}

fn softmax_loss_only(weights: &Mat, bias: &[f64], features: &Mat, labels: &[usize]) -> f64 {
    let layer = DenseLayer {
        weights: weights.clone(),
        bias: bias.to_vec(),
        activation: Activation::Softmax,
    };
    let probs = layer.forward_batch(features);
    let mut loss = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        loss -= probs.at(i, label).max(1e-300).ln();
    }
    loss / features.rows as f64
}

/// Trains the softmax output layer on fixed features.
pub fn train_softmax(
    features: &Mat,
    labels: &[usize],
    n_classes: usize,
    epochs: usize,
    opt: &OptimizerConfig,
    rng: &mut ChaCha20Rng,
) -> Result<(DenseLayer, Vec<f64>)> {
    if labels.len() != features.rows {
        return Err(Error::ShapeMismatch {
            expected: features.rows,
            got: labels.len(),
        });
    }
    let weights = init_weights(n_classes, features.cols, rng);
    let bias = vec![0.0; n_classes];
    let mut params = vec![weights.data, bias];
    let mk = |p: &[Vec<f64>]| Mat {
        rows: n_classes,
        cols: features.cols,
        data: p[0].clone(),
    };
    let losses = descend(
        &mut params,
        epochs,
        opt,
        |p| {
            let (loss, gw, gb) = softmax_loss_grad(&mk(p), &p[1], features, labels);
            (loss, vec![gw.data, gb])
        },
        |p| softmax_loss_only(&mk(p), &p[1], features, labels),
    )?;
    let bias = params.pop().unwrap();
    let weights = Mat {
        rows: n_classes,
        cols: features.cols,
        data: params.pop().unwrap(),
    };
    Ok((
        DenseLayer {
            weights,
            bias,
            activation: Activation::Softmax,
        },
        losses,
    ))
}

// ---------------------------------------------------------------------------
// Stacked network
// ---------------------------------------------------------------------------

/// Per-epoch losses of each training stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub autoencoder1: Vec<f64>,
    pub autoencoder2: Vec<f64>,
    pub softmax: Vec<f64>,
    pub fine_tune: Vec<f64>,
}

/// One subgroup's classifier: two stacked encoders and a softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupNetwork {
    pub encoder1: DenseLayer,
    pub encoder2: DenseLayer,
    pub output: DenseLayer,
    pub training_log: TrainingLog,
}

impl SubgroupNetwork {
    pub fn input_dim(&self) -> usize {
        self.encoder1.in_dim()
    }

    pub fn n_classes(&self) -> usize {
        self.output.out_dim()
    }

    /// Per-class probability vector; sums to 1.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let h1 = self.encoder1.encode(x)?;
        let h2 = self.encoder2.encode(&h1)?;
        self.output.encode(&h2)
    }

    fn forward_batch(&self, data: &Mat) -> (Mat, Mat, Mat) {
        let a1 = self.encoder1.forward_batch(data);
        let a2 = self.encoder2.forward_batch(&a1);
        let probs = self.output.forward_batch(&a2);
        (a1, a2, probs)
    }

    /// Mean cross-entropy of the full stack on labeled data.
    pub fn cross_entropy(&self, data: &Mat, labels: &[usize]) -> f64 {
        let (_, _, probs) = self.forward_batch(data);
        let mut loss = 0.0;
        for (i, &label) in labels.iter().enumerate() {
            loss -= probs.at(i, label).max(1e-300).ln();
        }
        loss / data.rows as f64
    }

    pub fn accuracy(&self, data: &Mat, labels: &[usize]) -> f64 {
        let (_, _, probs) = self.forward_batch(data);
        let mut correct = 0usize;
        for (i, &label) in labels.iter().enumerate() {
            let row = probs.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            if best == label {
                correct += 1;
            }
        }
        correct as f64 / labels.len() as f64
    }
}

/// Gradients of the stacked cross-entropy with respect to all three layers,
/// in the order (W1, b1, W2, b2, W3, b3).
#[allow(clippy::type_complexity)]
pub fn stack_loss_grad(
    net: &SubgroupNetwork,
    data: &Mat,
    labels: &[usize],
) -> (f64, [(Mat, Vec<f64>); 3]) {
    let m = data.rows as f64;
    let (a1, a2, probs) = net.forward_batch(data);
    let mut loss = 0.0;
    let mut d3 = probs;
    for (i, &label) in labels.iter().enumerate() {
        loss -= d3.at(i, label).max(1e-300).ln();
        *d3.at_mut(i, label) -= 1.0;
    }
    loss /= m;
    for v in &mut d3.data {
        *v /= m;
    }

    let gw3 = d3.t_matmul(&a2);
    let gb3 = d3.col_sums();

    let mut d2 = d3.matmul(&net.output.weights);
    for i in 0..d2.data.len() {
        let a = a2.data[i];
        d2.data[i] *= a * (1.0 - a);
    }
    let gw2 = d2.t_matmul(&a1);
    let gb2 = d2.col_sums();

    let mut d1 = d2.matmul(&net.encoder2.weights);
    for i in 0..d1.data.len() {
        let a = a1.data[i];
        d1.data[i] *= a * (1.0 - a);
    }
    let gw1 = d1.t_matmul(data);
    let gb1 = d1.col_sums();

    (loss, [(gw1, gb1), (gw2, gb2), (gw3, gb3)])
}

/// Joint backpropagation through the stacked encoders and softmax head.
pub fn fine_tune(
    net: &mut SubgroupNetwork,
    data: &Mat,
    labels: &[usize],
    epochs: usize,
    opt: &OptimizerConfig,
) -> Result<()> {
    let dims: Vec<(usize, usize)> = [&net.encoder1, &net.encoder2, &net.output]
        .iter()
        .map(|l| (l.weights.rows, l.weights.cols))
        .collect();
    let rebuild = |p: &[Vec<f64>], proto: &SubgroupNetwork| -> SubgroupNetwork {
        let mut out = proto.clone();
        for (k, layer) in [&mut out.encoder1, &mut out.encoder2, &mut out.output]
            .into_iter()
            .enumerate()
        {
            layer.weights = Mat {
                rows: dims[k].0,
                cols: dims[k].1,
                data: p[2 * k].clone(),
            };
            layer.bias = p[2 * k + 1].clone();
        }
        out
    };

    let mut params = vec![
        net.encoder1.weights.data.clone(),
        net.encoder1.bias.clone(),
        net.encoder2.weights.data.clone(),
        net.encoder2.bias.clone(),
        net.output.weights.data.clone(),
        net.output.bias.clone(),
    ];
    let proto = net.clone();
    let losses = descend(
        &mut params,
        epochs,
        opt,
        |p| {
            let candidate = rebuild(p, &proto);
            let (loss, grads) = stack_loss_grad(&candidate, data, labels);
            let [(gw1, gb1), (gw2, gb2), (gw3, gb3)] = grads;
            (loss, vec![gw1.data, gb1, gw2.data, gb2, gw3.data, gb3])
        },
        |p| rebuild(p, &proto).cross_entropy(data, labels),
    )?;

    *net = rebuild(&params, &proto);
    net.training_log.fine_tune = losses;
    Ok(())
}

/// Full greedy training of one subgroup network: two autoencoders, softmax,
/// then optional joint fine-tuning.
pub struct StackTrainConfig {
    pub ae1: AutoencoderHyperparams,
    pub ae2: AutoencoderHyperparams,
    pub softmax_epochs: usize,
    pub fine_tune_epochs: usize,
    pub fine_tune: bool,
    pub optimizer: OptimizerConfig,
}

pub fn train_stack(
    data: &Mat,
    labels: &[usize],
    n_classes: usize,
    cfg: &StackTrainConfig,
    seed: u64,
) -> Result<SubgroupNetwork> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let ae1 = train_autoencoder(data, cfg.ae1, &cfg.optimizer, &mut rng)?;
    let enc1 = ae1.encoder_layer();
    let a1 = enc1.forward_batch(data);
    let ae2 = train_autoencoder(&a1, cfg.ae2, &cfg.optimizer, &mut rng)?;
    let enc2 = ae2.encoder_layer();
    let a2 = enc2.forward_batch(&a1);
    let (softmax, softmax_losses) = train_softmax(
        &a2,
        labels,
        n_classes,
        cfg.softmax_epochs,
        &cfg.optimizer,
        &mut rng,
    )?;

    let mut net = SubgroupNetwork {
        encoder1: enc1,
        encoder2: enc2,
        output: softmax,
        training_log: TrainingLog {
            autoencoder1: ae1.loss_per_epoch,
            autoencoder2: ae2.loss_per_epoch,
            softmax: softmax_losses,
            fine_tune: Vec::new(),
        },
    };
    if cfg.fine_tune {
        fine_tune(&mut net, data, labels, cfg.fine_tune_epochs, &cfg.optimizer)?;
    }
    Ok(net)
}

// ---------------------------------------------------------------------------
// Input scaling
// ---------------------------------------------------------------------------

/// Per-dimension min-max scaler fitted on training data; maps into [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(data: &Mat) -> MinMaxScaler {
        let mut min = vec![f64::INFINITY; data.cols];
        let mut max = vec![f64::NEG_INFINITY; data.cols];
        for r in 0..data.rows {
            for (j, &v) in data.row(r).iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        MinMaxScaler { min, max }
    }

    pub fn transform_row(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, &v)| {
                let span = self.max[j] - self.min[j];
                if span > 1e-12 {
                    (v - self.min[j]) / span
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn transform(&self, data: &Mat) -> Mat {
        let mut out = Mat::zeros(data.rows, data.cols);
        for r in 0..data.rows {
            let scaled = self.transform_row(data.row(r));
            out.data[r * data.cols..(r + 1) * data.cols].copy_from_slice(&scaled);
        }
        out
    }
}
