//! Plaintext NAG training, used as the reference for the encrypted run.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::schedule::{Decision, EarlyStopping, NagSchedule};
use super::TrainConfig;
use crate::approx::scalar::{softmax_exact, softmax_row};
use crate::approx::SoftmaxConfig;
use crate::data::Dataset;
use crate::error::Result;

/// Which softmax a plaintext run uses.
#[derive(Debug, Clone, PartialEq)]
pub enum PlainSoftmax {
    Exact,
    /// The polynomial approximation, bit-for-bit the encrypted arithmetic.
    Approx(SoftmaxConfig),
}

impl PlainSoftmax {
    pub fn rows(&self, logits: &Array2<f64>) -> Array2<f64> {
        let mut out = logits.clone();
        for mut row in out.axis_iter_mut(Axis(0)) {
            let x = row.to_vec();
            let p = match self {
                PlainSoftmax::Exact => softmax_exact(&x),
                PlainSoftmax::Approx(cfg) => softmax_row(&x, cfg),
            };
            row.assign(&ndarray::Array1::from(p));
        }
        out
    }
}

/// Seeded uniform initial weights in `[−0.01, 0.01]`.
pub fn initial_weights(classes: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((classes, cols), |_| rng.random_range(-0.01..=0.01))
}

/// Consecutive `[lo, hi)` row ranges of at most `batch` rows.
pub fn batch_ranges(n: usize, batch: usize) -> Vec<(usize, usize)> {
    (0..n).step_by(batch.max(1)).map(|lo| (lo, (lo + batch).min(n))).collect()
}

/// Batch visiting order for an epoch (0-based).
pub fn batch_order(epoch: usize, batches: usize, shuffle_seed: Option<u64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..batches).collect();
    if let Some(seed) = shuffle_seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        order.shuffle(&mut rng);
    }
    order
}

/// Mean cross-entropy of row logits against integer labels.
pub fn cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> f64 {
    let total: f64 = logits
        .axis_iter(Axis(0))
        .zip(labels)
        .map(|(row, &l)| {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            lse - row[l]
        })
        .sum();
    total / labels.len().max(1) as f64
}

/// Index of the largest entry of each row.
pub fn predict(logits: &Array2<f64>) -> Vec<usize> {
    logits
        .axis_iter(Axis(0))
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                .0
        })
        .collect()
}

/// Fraction of rows of `data` classified correctly by `weights` (`c × (f+1)`).
pub fn accuracy(weights: &Array2<f64>, data: &Dataset) -> f64 {
    let logits = data.design().dot(&weights.t());
    let hits = predict(&logits).iter().zip(&data.labels).filter(|(p, l)| p == l).count();
    hits as f64 / data.len().max(1) as f64
}

/// NAG on plaintext weights.
#[derive(Debug, Clone)]
pub struct PlainTrainer {
    pub w: Array2<f64>,
    pub v: Array2<f64>,
    pub schedule: NagSchedule,
    pub softmax: PlainSoftmax,
    pub learning_rate: f64,
}

impl PlainTrainer {
    pub fn new(w0: Array2<f64>, softmax: PlainSoftmax, learning_rate: f64) -> Self {
        PlainTrainer {
            v: w0.clone(),
            w: w0,
            schedule: NagSchedule::new(),
            softmax,
            learning_rate,
        }
    }

    /// One update on design matrix `x` (`N × (f+1)`) and one-hot `y`.
    /// Returns the logits the softmax was applied to.
    pub fn step(&mut self, x: &Array2<f64>, y: &Array2<f64>) -> Array2<f64> {
        let logits = x.dot(&self.v.t());
        let p = self.softmax.rows(&logits);
        let g = (&p - y).t().dot(x) * (self.learning_rate / x.nrows() as f64);
        let w_next = &self.v - &g;
        let gamma = self.schedule.advance();
        self.v = &w_next * (1.0 - gamma) + &self.w * gamma;
        self.w = w_next;
        logits
    }
}

/// Result of a plaintext fit.
#[derive(Debug, Clone)]
pub struct PlainFit {
    pub weights: Array2<f64>,
    pub best_epoch: usize,
    pub val_losses: Vec<f64>,
    pub steps: usize,
}

/// The plaintext counterpart of [`fit`](super::fit): same initial weights,
/// batches, order and early stopping.
pub fn fit_plain(train: &Dataset, val: &Dataset, cfg: &TrainConfig, softmax: PlainSoftmax) -> Result<PlainFit> {
    cfg.validate(train)?;
    let x = train.design();
    let y = train.one_hot();
    let xv = val.design();
    let ranges = batch_ranges(train.len(), cfg.batch_size);
    let batches: Vec<(Array2<f64>, Array2<f64>)> = ranges
        .iter()
        .map(|&(lo, hi)| {
            (
                x.slice(ndarray::s![lo..hi, ..]).to_owned(),
                y.slice(ndarray::s![lo..hi, ..]).to_owned(),
            )
        })
        .collect();
    let mut tr = PlainTrainer::new(
        initial_weights(train.classes, x.ncols(), cfg.seed),
        softmax,
        cfg.learning_rate,
    );
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = tr.w.clone();
    let mut val_losses = Vec::new();
    let mut steps = 0;
    for epoch in 0..cfg.max_epochs {
        for b in batch_order(epoch, batches.len(), cfg.shuffle_seed) {
            tr.step(&batches[b].0, &batches[b].1);
            steps += 1;
        }
        let loss = cross_entropy(&xv.dot(&tr.w.t()), &val.labels);
        val_losses.push(loss);
        match stopper.observe(loss) {
            Decision::Continue { improved } => {
                if improved {
                    best = tr.w.clone();
                }
            }
            Decision::Stop => break,
        }
    }
    Ok(PlainFit {
        weights: best,
        best_epoch: stopper.best_epoch().unwrap_or(0),
        val_losses,
        steps,
    })
}
