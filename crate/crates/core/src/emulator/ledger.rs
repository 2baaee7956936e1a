//! Operation counting and latency estimation.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

/// Kinds of homomorphic operations tracked by the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    Add,
    CMult,
    Mult,
    Rot,
    Conj,
    Bootstrap,
}

impl OpKind {
    pub const ALL: [OpKind; 6] = [
        OpKind::Add,
        OpKind::CMult,
        OpKind::Mult,
        OpKind::Rot,
        OpKind::Conj,
        OpKind::Bootstrap,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

/// Per-operation latency weights in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpWeights {
    pub add: f64,
    pub cmult: f64,
    pub mult: f64,
    pub rot: f64,
    /// Conjugation is a key-switching automorphism, priced like a rotation.
    pub conj: f64,
    pub bootstrap: f64,
}

impl Default for OpWeights {
    fn default() -> Self {
        OpWeights {
            add: 0.085,
            cmult: 0.9,
            mult: 1.6,
            rot: 1.2,
            conj: 1.2,
            bootstrap: 159.0,
        }
    }
}

impl OpWeights {
    pub fn get(&self, kind: OpKind) -> f64 {
        match kind {
            OpKind::Add => self.add,
            OpKind::CMult => self.cmult,
            OpKind::Mult => self.mult,
            OpKind::Rot => self.rot,
            OpKind::Conj => self.conj,
            OpKind::Bootstrap => self.bootstrap,
        }
    }
}

/// Plain snapshot of operation counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub add: u64,
    pub cmult: u64,
    pub mult: u64,
    pub rot: u64,
    pub conj: u64,
    pub bootstrap: u64,
}

impl OpCounts {
    pub fn get(&self, kind: OpKind) -> u64 {
        match kind {
            OpKind::Add => self.add,
            OpKind::CMult => self.cmult,
            OpKind::Mult => self.mult,
            OpKind::Rot => self.rot,
            OpKind::Conj => self.conj,
            OpKind::Bootstrap => self.bootstrap,
        }
    }

    fn get_mut(&mut self, kind: OpKind) -> &mut u64 {
        match kind {
            OpKind::Add => &mut self.add,
            OpKind::CMult => &mut self.cmult,
            OpKind::Mult => &mut self.mult,
            OpKind::Rot => &mut self.rot,
            OpKind::Conj => &mut self.conj,
            OpKind::Bootstrap => &mut self.bootstrap,
        }
    }

    /// Σ counts × weights.
    pub fn estimated_ms(&self, weights: &OpWeights) -> f64 {
        OpKind::ALL
            .iter()
            .map(|&k| self.get(k) as f64 * weights.get(k))
            .sum()
    }
}

impl Add for OpCounts {
    type Output = OpCounts;
    fn add(mut self, rhs: OpCounts) -> OpCounts {
        self += rhs;
        self
    }
}

impl AddAssign for OpCounts {
    fn add_assign(&mut self, rhs: OpCounts) {
        for k in OpKind::ALL {
            *self.get_mut(k) += rhs.get(k);
        }
    }
}

impl Sub for OpCounts {
    type Output = OpCounts;
    /// Difference of two snapshots of the same ledger (`later - earlier`).
    fn sub(mut self, rhs: OpCounts) -> OpCounts {
        for k in OpKind::ALL {
            *self.get_mut(k) -= rhs.get(k);
        }
        self
    }
}

impl fmt::Display for OpCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Add {} CMult {} Mult {} Rot {} Conj {} Bootstrap {}",
            self.add, self.cmult, self.mult, self.rot, self.conj, self.bootstrap
        )
    }
}

/// Thread-safe running counters.
#[derive(Debug, Default)]
pub struct OpLedger {
    counters: [AtomicU64; 6],
}

impl OpLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, kind: OpKind) {
        self.counters[kind.index()].fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> OpCounts {
        let mut out = OpCounts::default();
        for k in OpKind::ALL {
            *out.get_mut(k) = self.counters[k.index()].load(Ordering::Relaxed);
        }
        out
    }
}
