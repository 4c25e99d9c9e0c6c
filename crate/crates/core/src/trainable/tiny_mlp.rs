use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{clamp_diverged, is_diverged, missing_hp, Trainable, TrainableKind, WeightState, SENTINEL_SCORE};
use crate::hpspace::{HpVector, HyperparameterSpace};
use crate::rng::{stream, Purpose};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetVariant {
    /// Gaussian blobs around well-separated class centers.
    #[default]
    Linear,
    /// Four clusters on the corners of a square labelled by XOR.
    Xor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TinyMlpParams {
    pub input_dim: usize,
    pub hidden: usize,
    pub classes: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub batch_size: usize,
    pub variant: DatasetVariant,
    /// Distance between class centers, in units of the cluster std.
    pub separation: f64,
    pub dataset_seed: u64,
}

impl Default for TinyMlpParams {
    fn default() -> Self {
        TinyMlpParams {
            input_dim: 2,
            hidden: 8,
            classes: 2,
            train_size: 512,
            test_size: 256,
            batch_size: 32,
            variant: DatasetVariant::Linear,
            separation: 4.0,
            dataset_seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
struct Dataset {
    x: Vec<f64>,
    y: Vec<usize>,
    dim: usize,
}

impl Dataset {
    fn len(&self) -> usize {
        self.y.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }
}

/// One-hidden-layer tanh perceptron with softmax cross-entropy, trained by
/// minibatch SGD with momentum and weight decay.
///
/// Weights are packed as `[W1 (hidden×input), b1, W2 (classes×hidden), b2]`
/// followed by a momentum buffer of the same length.
#[derive(Debug, Clone)]
pub struct TinyMlp {
    params: TinyMlpParams,
    train: Dataset,
    test: Dataset,
    lr_index: usize,
    momentum_index: usize,
    wd_index: usize,
}

impl TinyMlp {
    pub fn new(params: TinyMlpParams, space: &HyperparameterSpace) -> Result<Self> {
        if params.hidden == 0 {
            return Err(Error::Config("tiny_mlp.hidden must be positive".into()));
        }
        if params.input_dim == 0
            || params.classes < 2
            || params.train_size == 0
            || params.test_size == 0
            || params.batch_size == 0
            || !(params.separation >= 0.0)
        {
            return Err(Error::Config(alloc::format!(
                "invalid tiny_mlp parameters {params:?}"
            )));
        }
        if params.variant == DatasetVariant::Xor && (params.input_dim < 2 || params.classes != 2) {
            return Err(Error::Config(
                "the xor variant needs input_dim >= 2 and 2 classes".into(),
            ));
        }
        let idx = |name: &str| space.index_of(name).ok_or_else(|| missing_hp(name, "tiny_mlp"));
        let lr_index = idx("learning_rate")?;
        let momentum_index = idx("momentum")?;
        let wd_index = idx("weight_decay")?;
        let train = generate(&params, params.train_size, 0);
        let test = generate(&params, params.test_size, 1);
        Ok(TinyMlp {
            params,
            train,
            test,
            lr_index,
            momentum_index,
            wd_index,
        })
    }

    /// Number of network parameters (half of [`Trainable::dim`]).
    pub fn n_params(&self) -> usize {
        let p = &self.params;
        p.hidden * p.input_dim + p.hidden + p.classes * p.hidden + p.classes
    }

    fn forward(&self, theta: &[f64], x: &[f64], hidden: &mut [f64], logits: &mut [f64]) {
        let p = &self.params;
        let (w1, rest) = theta.split_at(p.hidden * p.input_dim);
        let (b1, rest) = rest.split_at(p.hidden);
        let (w2, b2) = rest.split_at(p.classes * p.hidden);
        for j in 0..p.hidden {
            let row = &w1[j * p.input_dim..(j + 1) * p.input_dim];
            let a: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b1[j];
            hidden[j] = a.tanh();
        }
        for k in 0..p.classes {
            let row = &w2[k * p.hidden..(k + 1) * p.hidden];
            logits[k] = row.iter().zip(hidden.iter()).map(|(w, h)| w * h).sum::<f64>() + b2[k];
        }
    }

    /// Mean cross-entropy over the training examples in `batch`.
    pub fn loss(&self, theta: &[f64], batch: &[usize]) -> f64 {
        let p = &self.params;
        let mut hidden = vec![0.0; p.hidden];
        let mut logits = vec![0.0; p.classes];
        let mut total = 0.0;
        for &i in batch {
            self.forward(theta, self.train.row(i), &mut hidden, &mut logits);
            total += log_sum_exp(&logits) - logits[self.train.y[i]];
        }
        total / batch.len() as f64
    }

    /// Mean cross-entropy over `batch` and its gradient with respect to the
    /// network parameters.
    pub fn loss_and_grad(&self, theta: &[f64], batch: &[usize]) -> (f64, Vec<f64>) {
        let p = &self.params;
        let (nw1, nb1, nw2) = (p.hidden * p.input_dim, p.hidden, p.classes * p.hidden);
        let mut grad = vec![0.0; self.n_params()];
        let mut hidden = vec![0.0; p.hidden];
        let mut logits = vec![0.0; p.classes];
        let mut dlogits = vec![0.0; p.classes];
        let mut dhidden = vec![0.0; p.hidden];
        let w2 = &theta[nw1 + nb1..nw1 + nb1 + nw2];
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for &i in batch {
            let x = self.train.row(i);
            let label = self.train.y[i];
            self.forward(theta, x, &mut hidden, &mut logits);
            let lse = log_sum_exp(&logits);
            total += lse - logits[label];
            for k in 0..p.classes {
                dlogits[k] = ((logits[k] - lse).exp() - if k == label { 1.0 } else { 0.0 }) * scale;
            }
            dhidden.iter_mut().for_each(|v| *v = 0.0);
            let (gw1, rest) = grad.split_at_mut(nw1);
            let (gb1, rest) = rest.split_at_mut(nb1);
            let (gw2, gb2) = rest.split_at_mut(nw2);
            for k in 0..p.classes {
                gb2[k] += dlogits[k];
                for j in 0..p.hidden {
                    gw2[k * p.hidden + j] += dlogits[k] * hidden[j];
                    dhidden[j] += dlogits[k] * w2[k * p.hidden + j];
                }
            }
            for j in 0..p.hidden {
                let da = dhidden[j] * (1.0 - hidden[j] * hidden[j]);
                gb1[j] += da;
                for (g, v) in gw1[j * p.input_dim..(j + 1) * p.input_dim].iter_mut().zip(x) {
                    *g += da * v;
                }
            }
        }
        (total * scale, grad)
    }

    fn accuracy(&self, theta: &[f64], data: &Dataset) -> f64 {
        let p = &self.params;
        let mut hidden = vec![0.0; p.hidden];
        let mut logits = vec![0.0; p.classes];
        let correct = (0..data.len())
            .filter(|&i| {
                self.forward(theta, data.row(i), &mut hidden, &mut logits);
                argmax(&logits) == data.y[i]
            })
            .count();
        correct as f64 / data.len() as f64
    }

    pub fn train_size(&self) -> usize {
        self.train.len()
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn generate(p: &TinyMlpParams, n: usize, split: u64) -> Dataset {
    let mut rng = stream(p.dataset_seed, Purpose::Init, 0xda7a, split);
    let centers: Vec<Vec<f64>> = match p.variant {
        DatasetVariant::Linear => {
            // centers on a common direction, `separation` apart
            let mut dir: Vec<f64> = (0..p.input_dim)
                .map(|_| rng.sample(StandardNormal))
                .collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            dir.iter_mut().for_each(|v| *v /= norm);
            (0..p.classes)
                .map(|c| {
                    let offset = (c as f64 - (p.classes - 1) as f64 / 2.0) * p.separation;
                    dir.iter().map(|d| d * offset).collect()
                })
                .collect()
        }
        DatasetVariant::Xor => Vec::new(),
    };
    let mut x = Vec::with_capacity(n * p.input_dim);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        match p.variant {
            DatasetVariant::Linear => {
                let c = rng.random_range(0..p.classes);
                for d in 0..p.input_dim {
                    let z: f64 = rng.sample(StandardNormal);
                    x.push(centers[c][d] + z);
                }
                y.push(c);
            }
            DatasetVariant::Xor => {
                let a = rng.random_bool(0.5);
                let b = rng.random_bool(0.5);
                let half = p.separation / 2.0;
                for d in 0..p.input_dim {
                    let center = match d {
                        0 => if a { half } else { -half },
                        1 => if b { half } else { -half },
                        _ => 0.0,
                    };
                    let z: f64 = rng.sample(StandardNormal);
                    x.push(center + 0.5 * z);
                }
                y.push((a ^ b) as usize);
            }
        }
    }
    Dataset {
        x,
        y,
        dim: p.input_dim,
    }
}

impl Trainable for TinyMlp {
    fn kind(&self) -> TrainableKind {
        TrainableKind::TinyMlp
    }

    fn dim(&self) -> usize {
        2 * self.n_params()
    }

    /// Glorot-uniform weights, zero biases, zero momentum.
    fn fresh_init(&self, rng: &mut dyn RngCore) -> WeightState {
        let p = &self.params;
        let mut w = Vec::with_capacity(self.dim());
        let a1 = (6.0 / (p.input_dim + p.hidden) as f64).sqrt();
        w.extend((0..p.hidden * p.input_dim).map(|_| rng.random_range(-a1..a1)));
        w.extend(core::iter::repeat(0.0).take(p.hidden));
        let a2 = (6.0 / (p.hidden + p.classes) as f64).sqrt();
        w.extend((0..p.classes * p.hidden).map(|_| rng.random_range(-a2..a2)));
        w.extend(core::iter::repeat(0.0).take(p.classes));
        w.extend(core::iter::repeat(0.0).take(self.n_params()));
        WeightState::new(w)
    }

    fn train(
        &self,
        weights: &WeightState,
        hps: &HpVector,
        inner_steps: u64,
        _global_step: u64,
        rng: &mut dyn RngCore,
    ) -> WeightState {
        let lr = hps.0[self.lr_index];
        let mu = hps.0[self.momentum_index];
        let wd = hps.0[self.wd_index];
        let np = self.n_params();
        let mut state = weights.values.clone();
        if is_diverged(&state) {
            return WeightState::new(state);
        }
        let mut batch = vec![0usize; self.params.batch_size];
        for _ in 0..inner_steps {
            for b in batch.iter_mut() {
                *b = rng.random_range(0..self.train.len());
            }
            let (theta, velocity) = state.split_at_mut(np);
            let (loss, grad) = self.loss_and_grad(theta, &batch);
            if !loss.is_finite() {
                theta.iter_mut().for_each(|v| *v = super::DIVERGENCE_LIMIT);
                break;
            }
            for ((t, v), g) in theta.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = mu * *v + g + wd * *t;
                *t -= lr * *v;
            }
            if clamp_diverged(&mut state) {
                break;
            }
        }
        WeightState::new(state)
    }

    /// Held-out accuracy.
    fn evaluate(&self, weights: &WeightState) -> f64 {
        let theta = &weights.values[..self.n_params()];
        if is_diverged(theta) {
            return SENTINEL_SCORE;
        }
        self.accuracy(theta, &self.test)
    }
}
