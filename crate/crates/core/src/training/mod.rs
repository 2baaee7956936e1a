//! Encrypted fine-tuning of a linear classification layer.
//!
//! The client encrypts its features and labels once and sends them to the
//! server. The server runs Nesterov-accelerated gradient steps entirely on
//! ciphertexts, with the softmax replaced by its polynomial approximation.
//! After each epoch it returns encrypted validation logits; the client
//! decrypts them, computes the loss and tells the server whether to keep
//! going. At the end the client receives and decrypts the best weights.
//!
//! Weights are `c × (f+1)`: the last column is the bias, paired with an
//! all-ones column appended to the features.

mod audit;
mod channel;
mod plain;
mod roles;
mod schedule;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::approx::SoftmaxConfig;
use crate::data::Dataset;
use crate::emulator::{Backend, OpCounts, SecretKey};
use crate::error::{Error, Result};
use crate::matmul::AtbPath;

pub use audit::{AuditEntry, DataKind, DecodeAudit, Decryptor, Role};
pub use channel::{
    decode_message, duplex, encode_message, read_record, write_record, BatchPurpose, Channel, Endpoint,
    Message, WireBlock,
};
pub use plain::{
    accuracy, batch_order, batch_ranges, cross_entropy, fit_plain, initial_weights, predict, PlainFit,
    PlainSoftmax, PlainTrainer,
};
pub use roles::{Client, Server, Validation};
pub use schedule::{Decision, EarlyStopping, NagSchedule};

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    /// Seed of the initial weights.
    pub seed: u64,
    /// Shuffle the batch order each epoch with this seed; `None` keeps
    /// the sequential order.
    pub shuffle_seed: Option<u64>,
    pub atb_path: AtbPath,
    pub softmax: SoftmaxConfig,
    /// Record per-step softmax input ranges and training loss. Needs the
    /// key, so it runs as a separate instrumentation role.
    pub trace: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            learning_rate: 0.1,
            max_epochs: 20,
            patience: 3,
            seed: 1,
            shuffle_seed: None,
            atb_path: AtbPath::Auto,
            softmax: SoftmaxConfig::default(),
            trace: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, train: &Dataset) -> Result<()> {
        self.softmax.validate()?;
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Protocol("batch_size, max_epochs and patience must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Protocol(format!("invalid learning rate {}", self.learning_rate)));
        }
        if train.is_empty() {
            return Err(Error::Shape("empty training set".into()));
        }
        Ok(())
    }
}

/// Per-step diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: usize,
    pub epoch: usize,
    pub batch: usize,
    /// Range of the softmax inputs; present when tracing.
    pub logit_min: Option<f64>,
    pub logit_max: Option<f64>,
    pub counts: OpCounts,
}

/// Per-epoch results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean cross-entropy of the softmax inputs seen during the epoch
    /// (evaluated at the momentum point); present when tracing.
    pub train_loss: Option<f64>,
    pub val_loss: f64,
    pub val_accuracy: f64,
    /// Operations of the validation round.
    pub counts: OpCounts,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct FitReport {
    /// Decrypted best weights, `c × (f+1)`.
    pub weights: Array2<f64>,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub epochs: Vec<EpochRecord>,
    pub steps: Vec<StepTrace>,
    /// Operations before the first step (weight encryption and bootstraps).
    pub setup_counts: OpCounts,
    pub counts: OpCounts,
    pub estimated_ms: f64,
    pub audit: Vec<AuditEntry>,
    pub server_violations: u64,
    pub client_bytes_sent: usize,
    pub server_bytes_sent: usize,
}

/// Runs the protocol end to end on one backend shared by both parties.
pub fn fit<B>(backend: &B, key: &SecretKey, train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<FitReport>
where
    B: Backend,
    B::Block: WireBlock,
{
    cfg.validate(train)?;
    if val.classes != train.classes || val.num_features() != train.num_features() {
        return Err(Error::Shape("validation set does not match the training set".into()));
    }
    let ctx = backend.context().clone();
    let ledger = backend.ledger();
    let start = ledger.snapshot();
    let audit = DecodeAudit::new();
    let observer = Decryptor::new(Role::Instrumentation, key, audit.clone());
    let (mut client_end, mut server_end) = duplex();

    let mut client = Client::new(backend, key, audit.clone(), cfg.patience);
    let w0 = initial_weights(train.classes, train.num_features() + 1, cfg.seed);
    let mut server = Server::new(backend, cfg.clone(), &w0)?;

    for msg in client.encrypt_training(train, cfg.batch_size)? {
        client_end.send(&msg)?;
    }
    client_end.send(&client.encrypt_validation(val)?)?;
    while let Ok(rec) = server_end.recv_record() {
        server.receive(decode_message(&rec, &ctx)?)?;
    }

    let labels: Vec<Vec<usize>> = batch_ranges(train.len(), cfg.batch_size)
        .into_iter()
        .map(|(lo, hi)| train.labels[lo..hi].to_vec())
        .collect();
    let setup_counts = ledger.snapshot() - start;
    let mut mark = ledger.snapshot();
    let mut steps = Vec::new();
    let mut epochs = Vec::new();
    let mut stopped_early = false;
    for epoch in 0..cfg.max_epochs {
        let mut loss_sum = 0.0;
        for b in batch_order(epoch, server.num_batches(), cfg.shuffle_seed) {
            let logits = server.step(b)?;
            let now = ledger.snapshot();
            let (mut lo, mut hi) = (None, None);
            if cfg.trace {
                let l = observer.decode(backend, DataKind::Logits, &logits)?;
                lo = Some(l.iter().cloned().fold(f64::INFINITY, f64::min));
                hi = Some(l.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
                loss_sum += cross_entropy(&l, &labels[b]) * labels[b].len() as f64;
            }
            steps.push(StepTrace {
                step: steps.len() + 1,
                epoch: epoch + 1,
                batch: b,
                logit_min: lo,
                logit_max: hi,
                counts: now - mark,
            });
            mark = now;
        }

        server_end.send(&Message::EncryptedValLogits(server.validation_logits()?))?;
        let logits = match client_end.recv::<B::Block>(&ctx)? {
            Message::EncryptedValLogits(m) => m,
            other => return Err(Error::Protocol(format!("client expected logits, got {}", other.name()))),
        };
        let v = client.validate(&logits)?;
        client_end.send::<B::Block>(&Message::StopSignal(v.decision))?;
        let stop = match server_end.recv::<B::Block>(&ctx)? {
            Message::StopSignal(d) => server.on_decision(d),
            other => return Err(Error::Protocol(format!("server expected a decision, got {}", other.name()))),
        };
        let now = ledger.snapshot();
        epochs.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: cfg.trace.then(|| loss_sum / train.len() as f64),
            val_loss: v.loss,
            val_accuracy: v.accuracy,
            counts: now - mark,
        });
        mark = now;
        if stop {
            stopped_early = true;
            break;
        }
    }

    server_end.send(&server.final_weights())?;
    let weights = match client_end.recv::<B::Block>(&ctx)? {
        Message::FinalWeights(w) => client.receive_weights(&w)?,
        other => return Err(Error::Protocol(format!("client expected weights, got {}", other.name()))),
    };
    let counts = ledger.snapshot() - start;
    Ok(FitReport {
        weights,
        best_epoch: client.best_epoch().unwrap_or(0),
        stopped_early,
        epochs,
        steps,
        setup_counts,
        estimated_ms: counts.estimated_ms(&ctx.weights),
        counts,
        audit: audit.entries(),
        server_violations: audit.server_violations(),
        client_bytes_sent: client_end.sent_bytes(),
        server_bytes_sent: server_end.sent_bytes(),
    })
}
