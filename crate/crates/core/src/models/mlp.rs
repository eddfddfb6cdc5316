//! Two-layer perceptron head: `dim → 128 (ReLU) → 2 (softmax)`, trained
//! with mean cross-entropy by seeded mini-batch gradient descent.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_xy, require_both_classes, Classifier};
use crate::error::{Error, Result};
use crate::seed;

pub const HIDDEN_WIDTH: usize = 128;

/// Network parameters. Gradients use the same layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub dim: usize,
    pub hidden: usize,
    /// Row-major `hidden × dim`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// Row-major `2 × hidden`.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

struct Forward {
    pre: Vec<f64>,
    act: Vec<f64>,
    probs: [f64; 2],
    loss_terms: [f64; 2],
}

impl MlpModel {
    /// Uniform initialization in `±1/√fan_in` for weights and biases.
    pub fn init(dim: usize, seed: u64) -> Self {
        Self::init_from(dim, HIDDEN_WIDTH, &mut seed::rng(seed))
    }

    fn init_from(dim: usize, hidden: usize, rng: &mut seed::Rng) -> Self {
        let mut uniform = |fan_in: usize, n: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            (0..n)
                .map(|_| rng.random_range(-bound..=bound))
                .collect::<Vec<f64>>()
        };
        let w1 = uniform(dim, hidden * dim);
        let b1 = uniform(dim, hidden);
        let w2 = uniform(hidden, 2 * hidden);
        let b2 = uniform(hidden, 2);
        MlpModel {
            dim,
            hidden,
            w1,
            b1,
            w2,
            b2,
        }
    }

    fn zeros_like(&self) -> Self {
        MlpModel {
            dim: self.dim,
            hidden: self.hidden,
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.b1.len()],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; self.b2.len()],
        }
    }

    /// All parameters in a fixed order: w1, b1, w2, b2.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .chain(&mut self.b1)
            .chain(&mut self.w2)
            .chain(&mut self.b2)
    }

    fn forward(&self, x: &[f64]) -> Forward {
        let pre: Vec<f64> = (0..self.hidden)
            .map(|j| {
                let row = &self.w1[j * self.dim..(j + 1) * self.dim];
                row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[j]
            })
            .collect();
        let act: Vec<f64> = pre.iter().map(|&z| z.max(0.0)).collect();
        let logits: [f64; 2] = std::array::from_fn(|k| {
            let row = &self.w2[k * self.hidden..(k + 1) * self.hidden];
            row.iter().zip(&act).map(|(w, h)| w * h).sum::<f64>() + self.b2[k]
        });
        let m = logits[0].max(logits[1]);
        let lse = m + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
        Forward {
            pre,
            act,
            probs: [(logits[0] - lse).exp(), (logits[1] - lse).exp()],
            loss_terms: [lse - logits[0], lse - logits[1]],
        }
    }

    /// Softmax output `[p(negative), p(positive)]`.
    pub fn probabilities(&self, x: &[f64]) -> [f64; 2] {
        self.forward(x).probs
    }

    /// Mean cross-entropy over a batch.
    pub fn loss(&self, xs: &[Vec<f64>], ys: &[bool]) -> f64 {
        let total: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, &y)| self.forward(x).loss_terms[usize::from(y)])
            .sum();
        total / xs.len() as f64
    }
}

impl Classifier for MlpModel {
    fn predict(&self, x: &[f64]) -> bool {
        let p = self.probabilities(x);
        p[1] > p[0]
    }
}

/// Exact gradient of the mean cross-entropy over a batch, by
/// backpropagation. Returns `(loss, gradient)`.
///
/// The ReLU derivative at exactly zero is taken as zero.
pub fn mlp_gradient(model: &MlpModel, xs: &[Vec<f64>], ys: &[bool]) -> Result<(f64, MlpModel)> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::Shape(format!(
            "batch of {} samples and {} labels",
            xs.len(),
            ys.len()
        )));
    }
    if let Some(bad) = xs.iter().find(|x| x.len() != model.dim) {
        return Err(Error::Shape(format!(
            "sample has {} features, model expects {}",
            bad.len(),
            model.dim
        )));
    }
    let scale = 1.0 / xs.len() as f64;
    let mut grad = model.zeros_like();
    let mut loss = 0.0;
    let (dim, hidden) = (model.dim, model.hidden);
    for (x, &y) in xs.iter().zip(ys) {
        let f = model.forward(x);
        loss += f.loss_terms[usize::from(y)] * scale;
        let dlogit = [
            (f.probs[0] - if y { 0.0 } else { 1.0 }) * scale,
            (f.probs[1] - if y { 1.0 } else { 0.0 }) * scale,
        ];
        for (k, &dk) in dlogit.iter().enumerate() {
            grad.b2[k] += dk;
            for j in 0..hidden {
                grad.w2[k * hidden + j] += dk * f.act[j];
            }
        }
        for j in 0..hidden {
            if f.pre[j] <= 0.0 {
                continue;
            }
            let dz = dlogit[0] * model.w2[j] + dlogit[1] * model.w2[hidden + j];
            grad.b1[j] += dz;
            for (g, v) in grad.w1[j * dim..(j + 1) * dim].iter_mut().zip(x) {
                *g += dz * v;
            }
        }
    }
    Ok((loss, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            epochs: 100,
            lr: 1e-3,
            batch: 32,
            seed: 0,
        }
    }
}

/// Trains from a seeded initialization, calling `observe(epoch, &model)` for
/// the initial model (epoch 0) and after every epoch. Returns the final
/// model.
pub fn train_mlp_observed(
    x: &[Vec<f64>],
    y: &[bool],
    cfg: &MlpConfig,
    mut observe: impl FnMut(usize, &MlpModel),
) -> Result<MlpModel> {
    let dim = check_xy(x, y)?;
    require_both_classes(y)?;
    if cfg.batch == 0 || !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(Error::Shape("batch and lr must be positive".into()));
    }
    let mut rng = seed::rng(cfg.seed);
    let mut model = MlpModel::init_from(dim, HIDDEN_WIDTH, &mut rng);
    observe(0, &model);
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut bx = Vec::with_capacity(cfg.batch);
    let mut by = Vec::with_capacity(cfg.batch);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch) {
            bx.clear();
            by.clear();
            bx.extend(chunk.iter().map(|&i| x[i].clone()));
            by.extend(chunk.iter().map(|&i| y[i]));
            let (loss, grad) = mlp_gradient(&model, &bx, &by)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            for (p, g) in model.params_mut().zip(grad.params()) {
                *p -= cfg.lr * g;
            }
        }
        if model.params().any(|p| !p.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch });
        }
        observe(epoch, &model);
    }
    Ok(model)
}

/// Trains and returns one snapshot per epoch, index 0 being the
/// initialization.
pub fn train_mlp(x: &[Vec<f64>], y: &[bool], cfg: &MlpConfig) -> Result<Vec<MlpModel>> {
    let mut snapshots = Vec::with_capacity(cfg.epochs + 1);
    train_mlp_observed(x, y, cfg, |_, m| snapshots.push(m.clone()))?;
    Ok(snapshots)
}
