//! The two protocol parties.
//!
//! The client owns the data and the secret key. The server owns only
//! ciphertexts and public operations: it has no key and no decode path.

use ndarray::Array2;

use super::audit::{DataKind, DecodeAudit, Decryptor, Role};
use super::channel::{BatchPurpose, Message};
use super::plain::{batch_ranges, cross_entropy, predict};
use super::schedule::{Decision, EarlyStopping, NagSchedule};
use super::TrainConfig;
use crate::approx::a_softmax;
use crate::data::Dataset;
use crate::emulator::{Backend, SecretKey};
use crate::encoding::{encode, EncodedMatrix, Tiling};
use crate::error::{Error, Result};
use crate::matmul::{diag_abt, diag_atb, ABT_DEPTH};

type Enc<B> = EncodedMatrix<<B as Backend>::Block>;

/// Holds the data and the key.
pub struct Client<'a, B: Backend> {
    backend: &'a B,
    decryptor: Decryptor<'a>,
    stopper: EarlyStopping,
    val_labels: Vec<usize>,
}

/// Validation outcome seen by the client.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validation {
    pub loss: f64,
    pub accuracy: f64,
    pub decision: Decision,
}

impl<'a, B: Backend> Client<'a, B> {
    pub fn new(backend: &'a B, key: &'a SecretKey, audit: DecodeAudit, patience: usize) -> Self {
        Client {
            backend,
            decryptor: Decryptor::new(Role::Client, key, audit),
            stopper: EarlyStopping::new(patience),
            val_labels: Vec::new(),
        }
    }

    /// Encrypts the training set as minibatches: `X` (with bias column) in
    /// plain layout and one-hot `Y` horizontally tiled.
    pub fn encrypt_training(&self, data: &Dataset, batch: usize) -> Result<Vec<Message<B::Block>>> {
        let x = data.design();
        let y = data.one_hot();
        let tiling = Tiling::fill_horizontal(self.backend.context(), data.classes)?;
        batch_ranges(data.len(), batch)
            .into_iter()
            .map(|(lo, hi)| {
                let xs = x.slice(ndarray::s![lo..hi, ..]).to_owned();
                let ys = y.slice(ndarray::s![lo..hi, ..]).to_owned();
                Ok(Message::EncryptedBatch {
                    purpose: BatchPurpose::Train,
                    x: encode(self.backend, &xs, Tiling::None)?,
                    y: Some(encode(self.backend, &ys, tiling)?),
                })
            })
            .collect()
    }

    /// Encrypts the validation features; the labels stay with the client.
    pub fn encrypt_validation(&mut self, data: &Dataset) -> Result<Message<B::Block>> {
        self.val_labels = data.labels.clone();
        Ok(Message::EncryptedBatch {
            purpose: BatchPurpose::Validation,
            x: encode(self.backend, &data.design(), Tiling::None)?,
            y: None,
        })
    }

    /// Decrypts validation logits, scores them and decides whether to stop.
    pub fn validate(&mut self, logits: &Enc<B>) -> Result<Validation> {
        let l = self.decryptor.decode(self.backend, DataKind::Logits, logits)?;
        if l.nrows() != self.val_labels.len() {
            return Err(Error::Protocol("validation logits do not match the validation set".into()));
        }
        let loss = cross_entropy(&l, &self.val_labels);
        let hits = predict(&l).iter().zip(&self.val_labels).filter(|(p, y)| p == y).count();
        let decision = self.stopper.observe(loss);
        Ok(Validation {
            loss,
            accuracy: hits as f64 / self.val_labels.len().max(1) as f64,
            decision,
        })
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.stopper.best_epoch()
    }

    /// Decrypts the final weights.
    pub fn receive_weights(&self, w: &Enc<B>) -> Result<Array2<f64>> {
        self.decryptor.decode(self.backend, DataKind::Weights, w)
    }
}

/// One encrypted minibatch held by the server.
struct EncBatch<K> {
    x: EncodedMatrix<K>,
    y: EncodedMatrix<K>,
}

/// Runs the updates on ciphertexts.
pub struct Server<'a, B: Backend> {
    backend: &'a B,
    cfg: TrainConfig,
    w: Enc<B>,
    v: Enc<B>,
    best: Enc<B>,
    schedule: NagSchedule,
    batches: Vec<EncBatch<B::Block>>,
    val_x: Option<Enc<B>>,
}

impl<'a, B: Backend> Server<'a, B> {
    /// Encrypts the initial weights (`c × (f+1)`, vertically tiled) with the
    /// public key; `V_1 = W_1`.
    pub fn new(backend: &'a B, cfg: TrainConfig, w0: &Array2<f64>) -> Result<Self> {
        let tiling = Tiling::fill_vertical(backend.context(), w0.nrows())?;
        let w = encode(backend, w0, tiling)?;
        Ok(Server {
            backend,
            cfg,
            v: w.clone(),
            best: w.clone(),
            w,
            schedule: NagSchedule::new(),
            batches: Vec::new(),
            val_x: None,
        })
    }

    /// Accepts a batch from the client.
    pub fn receive(&mut self, msg: Message<B::Block>) -> Result<()> {
        match msg {
            Message::EncryptedBatch { purpose: BatchPurpose::Train, x, y: Some(y) } => {
                if x.shape().0 != y.shape().0 || x.shape().1 != self.w.shape().1 || y.shape().1 != self.w.shape().0 {
                    return Err(Error::Shape(format!(
                        "batch {:?}/{:?} does not match weights {:?}",
                        x.shape(),
                        y.shape(),
                        self.w.shape()
                    )));
                }
                self.batches.push(EncBatch { x, y });
                Ok(())
            }
            Message::EncryptedBatch { purpose: BatchPurpose::Validation, x, .. } => {
                self.val_x = Some(x);
                Ok(())
            }
            other => Err(Error::Protocol(format!("server cannot accept {}", other.name()))),
        }
    }

    pub fn num_batches(&self) -> usize {
        self.batches.len()
    }

    pub fn schedule(&self) -> &NagSchedule {
        &self.schedule
    }

    pub fn w(&self) -> &Enc<B> {
        &self.w
    }

    pub fn v(&self) -> &Enc<B> {
        &self.v
    }

    /// One NAG update on stored batch `i`; returns the logits fed to the
    /// softmax (still encrypted).
    pub fn step(&mut self, i: usize) -> Result<Enc<B>> {
        let b = self
            .batches
            .get(i)
            .ok_or_else(|| Error::Protocol(format!("no batch {i}")))?;
        let (x, y) = (b.x.clone(), b.y.clone());
        self.nag_step(&x, &y)
    }

    /// `W' = V − (α/N)(P − Y)ᵀX` with `P = ASoftmax(X·Vᵀ)`, then
    /// `V' = (1 − γ)W' + γW`.
    pub fn nag_step(&mut self, x: &Enc<B>, y: &Enc<B>) -> Result<Enc<B>> {
        let be = self.backend;
        let n = x.shape().0 as f64;
        let logits = diag_abt(be, x, &self.v, 1.0)?;
        let p = a_softmax(be, &logits, &self.cfg.softmax)?;
        let d = p.try_zip(y, |a, b| be.sub(a, b))?;
        let g = diag_atb(be, &d, x, self.cfg.learning_rate / n, self.cfg.atb_path)?;
        let w_next = self.v.try_zip(&g, |a, b| be.sub(a, b))?;
        let gamma = self.schedule.advance();
        let scaled = |m: &Enc<B>, t: f64| {
            m.try_map(|b| be.cmult_scalar(b, num_complex::Complex64::new(t, 0.0)))
        };
        let v_next = scaled(&w_next, 1.0 - gamma)?.try_zip(&scaled(&self.w, gamma)?, |a, b| be.add(a, b))?;
        self.w = w_next.try_map(|b| be.ensure_level(b, ABT_DEPTH))?;
        self.v = v_next.try_map(|b| be.ensure_level(b, ABT_DEPTH))?;
        Ok(logits)
    }

    /// Validation logits with the latest `W`.
    pub fn validation_logits(&self) -> Result<Enc<B>> {
        let x = self
            .val_x
            .as_ref()
            .ok_or_else(|| Error::Protocol("no validation features received".into()))?;
        diag_abt(self.backend, x, &self.w, 1.0)
    }

    /// Applies the client's decision; returns whether to stop.
    pub fn on_decision(&mut self, d: Decision) -> bool {
        match d {
            Decision::Continue { improved: true } => {
                self.best = self.w.clone();
                false
            }
            Decision::Continue { improved: false } => false,
            Decision::Stop => true,
        }
    }

    /// The weights to hand back: the best validated `W`.
    pub fn final_weights(&self) -> Message<B::Block> {
        Message::FinalWeights(self.best.clone())
    }
}
