//! Decode accounting by role.
//!
//! Every decryption during training goes through a [`Decryptor`], which
//! records who decoded what. Only the client and the instrumentation
//! observer ever hold the key; the audit makes that checkable.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::emulator::{Backend, SecretKey};
use crate::encoding::{decode, EncodedMatrix};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Client,
    Server,
    /// A diagnostic observer outside the protocol (loss and range traces).
    Instrumentation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Features,
    Labels,
    Weights,
    Logits,
    Probabilities,
}

/// One audit line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub role: Role,
    pub kind: DataKind,
    pub count: u64,
}

/// Shared decode counter.
#[derive(Debug, Clone, Default)]
pub struct DecodeAudit {
    counts: Arc<Mutex<BTreeMap<(Role, DataKind), u64>>>,
}

impl DecodeAudit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, role: Role, kind: DataKind) {
        *self.counts.lock().expect("audit lock").entry((role, kind)).or_default() += 1;
    }

    pub fn count(&self, role: Role, kind: DataKind) -> u64 {
        self.counts.lock().expect("audit lock").get(&(role, kind)).copied().unwrap_or(0)
    }

    /// Server-side decodes of training data, labels, weights or
    /// probabilities. Must be zero.
    pub fn server_violations(&self) -> u64 {
        [DataKind::Features, DataKind::Labels, DataKind::Weights, DataKind::Probabilities]
            .into_iter()
            .map(|k| self.count(Role::Server, k))
            .sum()
    }

    pub fn entries(&self) -> Vec<AuditEntry> {
        self.counts
            .lock()
            .expect("audit lock")
            .iter()
            .map(|(&(role, kind), &count)| AuditEntry { role, kind, count })
            .collect()
    }
}

/// Key holder that records each decode.
pub struct Decryptor<'k> {
    role: Role,
    key: &'k SecretKey,
    audit: DecodeAudit,
}

impl<'k> Decryptor<'k> {
    pub fn new(role: Role, key: &'k SecretKey, audit: DecodeAudit) -> Self {
        Decryptor { role, key, audit }
    }

    pub fn decode<B: Backend>(&self, backend: &B, kind: DataKind, m: &EncodedMatrix<B::Block>) -> Result<Array2<f64>> {
        self.audit.record(self.role, kind);
        decode(backend, Some(self.key), m)
    }
}
