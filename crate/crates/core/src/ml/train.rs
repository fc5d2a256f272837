//! Single-layer softmax classifier trained by full-batch gradient descent on
//! the mean squared error between softmax outputs and one-hot labels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{DpeError, Result};
use crate::ml::encode::EncodedDataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Weights start uniform in `[-init_scale, init_scale]`; biases at zero.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            learning_rate: 0.05,
            seed: 0,
            init_scale: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainedModel {
    /// `inputs x classes`.
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub config: TrainConfig,
    /// Training accuracy before each update, then once after the last.
    pub accuracy_trace: Vec<f64>,
    pub final_loss: f64,
}

impl TrainedModel {
    pub fn init(n_inputs: usize, n_classes: usize, config: TrainConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let s = config.init_scale;
        let w = (0..n_inputs)
            .map(|_| {
                (0..n_classes)
                    .map(|_| if s > 0.0 { rng.gen_range(-s..=s) } else { 0.0 })
                    .collect()
            })
            .collect();
        Self {
            w,
            b: vec![0.0; n_classes],
            config,
            accuracy_trace: Vec::new(),
            final_loss: f64::NAN,
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.w.len()
    }

    pub fn n_classes(&self) -> usize {
        self.b.len()
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        logits(&self.w, &self.b, x)
    }

    /// Argmax of the logits; the lowest index wins exact ties.
    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.logits(x))
    }

    pub fn accuracy(&self, xs: &[Vec<f64>], ys: &[usize]) -> f64 {
        if ys.is_empty() {
            return f64::NAN;
        }
        let hits = xs
            .iter()
            .zip(ys)
            .filter(|(x, &y)| self.predict(x) == y)
            .count();
        hits as f64 / ys.len() as f64
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = k;
        }
    }
    best
}

fn logits(w: &[Vec<f64>], b: &[f64], x: &[f64]) -> Vec<f64> {
    let mut z = b.to_vec();
    for (xi, row) in x.iter().zip(w) {
        if *xi != 0.0 {
            for (zk, wk) in z.iter_mut().zip(row) {
                *zk += xi * wk;
            }
        }
    }
    z
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// MSE between softmax outputs and one-hot labels, averaged over samples and
/// classes, with its analytic gradient `(loss, dW, db)`.
pub fn loss_and_grad(
    w: &[Vec<f64>],
    b: &[f64],
    xs: &[Vec<f64>],
    ys: &[usize],
) -> (f64, Vec<Vec<f64>>, Vec<f64>) {
    let c = b.len();
    let norm = (xs.len() * c) as f64;
    let mut loss = 0.0;
    let mut gw = vec![vec![0.0; c]; w.len()];
    let mut gb = vec![0.0; c];
    for (x, &y) in xs.iter().zip(ys) {
        let p = softmax(&logits(w, b, x));
        let g: Vec<f64> = (0..c)
            .map(|k| {
                let t = if k == y { 1.0 } else { 0.0 };
                loss += (p[k] - t).powi(2);
                2.0 * (p[k] - t) / norm
            })
            .collect();
        let gp: f64 = g.iter().zip(&p).map(|(a, b)| a * b).sum();
        let dz: Vec<f64> = (0..c).map(|k| p[k] * (g[k] - gp)).collect();
        for (xi, row) in x.iter().zip(gw.iter_mut()) {
            if *xi != 0.0 {
                for (r, d) in row.iter_mut().zip(&dz) {
                    *r += xi * d;
                }
            }
        }
        for (r, d) in gb.iter_mut().zip(&dz) {
            *r += d;
        }
    }
    (loss / norm, gw, gb)
}

/// Trains on the training split of `enc`.
pub fn train(enc: &EncodedDataset, config: TrainConfig) -> Result<TrainedModel> {
    let xs: Vec<Vec<f64>> = enc.split.train.iter().map(|&i| enc.dense(i)).collect();
    let ys: Vec<usize> = enc.split.train.iter().map(|&i| enc.labels[i]).collect();
    train_dense(&xs, &ys, enc.width(), enc.n_classes, config)
}

pub fn train_dense(
    xs: &[Vec<f64>],
    ys: &[usize],
    n_inputs: usize,
    n_classes: usize,
    config: TrainConfig,
) -> Result<TrainedModel> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(DpeError::InvalidInput(format!(
            "{} samples with {} labels",
            xs.len(),
            ys.len()
        )));
    }
    if !(config.learning_rate.is_finite() && config.learning_rate >= 0.0) {
        return Err(DpeError::InvalidInput(format!(
            "learning rate {} must be finite and non-negative",
            config.learning_rate
        )));
    }
    let mut m = TrainedModel::init(n_inputs, n_classes, config);
    let lr = config.learning_rate;
    for epoch in 0..config.epochs {
        let (loss, gw, gb) = loss_and_grad(&m.w, &m.b, xs, ys);
        if !loss.is_finite() {
            return Err(DpeError::NonFinite { epoch });
        }
        m.accuracy_trace.push(m.accuracy(xs, ys));
        for (row, grow) in m.w.iter_mut().zip(&gw) {
            for (v, g) in row.iter_mut().zip(grow) {
                *v -= lr * g;
            }
        }
        for (v, g) in m.b.iter_mut().zip(&gb) {
            *v -= lr * g;
        }
        if m.w.iter().flatten().chain(&m.b).any(|v| !v.is_finite()) {
            return Err(DpeError::NonFinite { epoch });
        }
    }
    let (loss, _, _) = loss_and_grad(&m.w, &m.b, xs, ys);
    if !loss.is_finite() {
        return Err(DpeError::NonFinite {
            epoch: config.epochs,
        });
    }
    m.final_loss = loss;
    m.accuracy_trace.push(m.accuracy(xs, ys));
    Ok(m)
}
