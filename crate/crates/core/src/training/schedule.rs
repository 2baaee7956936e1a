//! Nesterov momentum schedule and validation-based early stopping.

use serde::{Deserialize, Serialize};

/// `λ_0 = 0`, `λ_{t+1} = (1 + √(1 + 4λ_t²)) / 2`, `γ_t = (1 − λ_t) / λ_{t+1}`.
///
/// The first update uses `γ_1 = (1 − λ_1)/λ_2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NagSchedule {
    /// Index of the next update, starting at 1.
    pub t: u64,
    lambda: f64,
}

impl Default for NagSchedule {
    fn default() -> Self {
        NagSchedule::new()
    }
}

impl NagSchedule {
    pub fn new() -> Self {
        NagSchedule {
            t: 1,
            lambda: next_lambda(0.0),
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `γ_t` for the next update.
    pub fn gamma(&self) -> f64 {
        (1.0 - self.lambda) / next_lambda(self.lambda)
    }

    /// Returns `γ_t` and moves to `t + 1`.
    pub fn advance(&mut self) -> f64 {
        let g = self.gamma();
        self.lambda = next_lambda(self.lambda);
        self.t += 1;
        g
    }
}

fn next_lambda(l: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * l * l).sqrt()) / 2.0
}

/// Outcome of one validation round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    /// Keep training; `improved` asks the server to keep the current weights
    /// as the best so far.
    Continue { improved: bool },
    Stop,
}

/// Stops after `patience` consecutive epochs without a strict improvement
/// of the best validation loss.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    best: f64,
    best_epoch: Option<usize>,
    since: usize,
    epoch: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: None,
            since: 0,
            epoch: 0,
        }
    }

    pub fn observe(&mut self, loss: f64) -> Decision {
        self.epoch += 1;
        if loss < self.best {
            self.best = loss;
            self.best_epoch = Some(self.epoch);
            self.since = 0;
            return Decision::Continue { improved: true };
        }
        self.since += 1;
        if self.since >= self.patience {
            Decision::Stop
        } else {
            Decision::Continue { improved: false }
        }
    }

    /// 1-based epoch of the best loss.
    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}
