//! Noise-free emulation of a leveled SIMD homomorphic encryption scheme.
//!
//! A ciphertext is a vector of `s` complex slots plus a remaining
//! multiplicative level. Every operation of the scheme (addition,
//! ciphertext and plaintext multiplication, rotation, conjugation,
//! bootstrapping) is applied exactly on the slot values and recorded in an
//! [`OpLedger`]. Only depth is modeled; there is no noise.
//!
//! Algorithms elsewhere in the crate are written against the [`Backend`]
//! trait so that a real scheme could be substituted for [`Emulator`].

mod ledger;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ledger::{OpCounts, OpKind, OpLedger, OpWeights};

/// Slot geometry, depth budget and cost weights of a ciphertext context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Context {
    /// Number of slots `s = s0 · s1`.
    pub slots: usize,
    /// Rows of the unit matrix held by one block.
    pub s0: usize,
    /// Columns of the unit matrix held by one block.
    pub s1: usize,
    pub max_level: u32,
    #[serde(default)]
    pub weights: OpWeights,
}

impl Context {
    pub const DEFAULT_MAX_LEVEL: u32 = 12;

    pub fn new(s0: usize, s1: usize, max_level: u32) -> Result<Self> {
        if !s0.is_power_of_two() || !s1.is_power_of_two() {
            return Err(Error::InvalidContext(format!(
                "unit shape {s0}x{s1} must be powers of two"
            )));
        }
        if max_level < 1 {
            return Err(Error::InvalidContext("max_level must be at least 1".into()));
        }
        Ok(Context {
            slots: s0 * s1,
            s0,
            s1,
            max_level,
            weights: OpWeights::default(),
        })
    }

    /// Context with `s` slots and `s0` rows per block.
    pub fn with_slots(slots: usize, s0: usize, max_level: u32) -> Result<Self> {
        if !slots.is_power_of_two() || s0 == 0 || s0 > slots {
            return Err(Error::InvalidContext(format!(
                "cannot split {slots} slots into {s0}-row units"
            )));
        }
        Self::new(s0, slots / s0, max_level)
    }

    /// Desk default used by tests: `s = 2^12`, 64×64 units.
    pub fn desk() -> Self {
        Self::new(64, 64, Self::DEFAULT_MAX_LEVEL).expect("valid desk context")
    }

    pub fn with_weights(mut self, weights: OpWeights) -> Self {
        self.weights = weights;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fresh = Context::new(self.s0, self.s1, self.max_level)?;
        if fresh.slots != self.slots {
            return Err(Error::InvalidContext(format!(
                "slots {} != s0·s1 = {}",
                self.slots, fresh.slots
            )));
        }
        Ok(())
    }
}

/// One emulated ciphertext, or a plaintext when `level` is `None`.
///
/// Plaintexts behave as if they had infinite level: they never limit the
/// level of a result and operations among plaintexts are free.
#[derive(Debug, Clone, PartialEq)]
pub struct CipherBlock {
    slots: Vec<Complex64>,
    level: Option<u32>,
}

impl CipherBlock {
    pub fn level(&self) -> Option<u32> {
        self.level
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn is_plaintext(&self) -> bool {
        self.level.is_none()
    }

    /// Slot values of a plaintext. Ciphertext slots need a [`SecretKey`].
    pub fn plain_slots(&self) -> Option<&[Complex64]> {
        self.level.is_none().then_some(&self.slots[..])
    }

    /// Appends the wire form: level (`u32::MAX` for plaintexts), slot
    /// count, then each slot as two little-endian `f64`.
    pub fn write_bytes(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.level.unwrap_or(u32::MAX).to_le_bytes());
        out.extend_from_slice(&(self.slots.len() as u32).to_le_bytes());
        for z in &self.slots {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }

    /// Reads one block written by [`write_bytes`](Self::write_bytes),
    /// advancing `buf`.
    pub fn read_bytes(buf: &mut &[u8]) -> Result<Self> {
        let level = read_u32(buf)?;
        let n = read_u32(buf)? as usize;
        if buf.len() < n * 16 {
            return Err(Error::Protocol("truncated block".into()));
        }
        let (body, rest) = buf.split_at(n * 16);
        let slots = body
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                Complex64::new(re, im)
            })
            .collect();
        *buf = rest;
        Ok(CipherBlock {
            slots,
            level: (level != u32::MAX).then_some(level),
        })
    }
}

fn read_u32(buf: &mut &[u8]) -> Result<u32> {
    if buf.len() < 4 {
        return Err(Error::Protocol("truncated block header".into()));
    }
    let (head, rest) = buf.split_at(4);
    *buf = rest;
    Ok(u32::from_le_bytes(head.try_into().expect("4 bytes")))
}

/// Decryption capability. Only the key holder can turn ciphertexts back
/// into numbers.
#[derive(Debug)]
pub struct SecretKey {
    id: u64,
}

/// Operations a leveled SIMD scheme must provide.
pub trait Backend: Sync {
    type Block: Clone + Send + Sync;

    fn context(&self) -> &Context;
    fn ledger(&self) -> &OpLedger;

    /// Remaining level; `None` for plaintexts.
    fn level(&self, x: &Self::Block) -> Option<u32>;

    /// Public-key encryption at the given level.
    fn encrypt_at_level(&self, slots: &[Complex64], level: u32) -> Result<Self::Block>;
    fn encrypt(&self, slots: &[Complex64]) -> Result<Self::Block> {
        self.encrypt_at_level(slots, self.context().max_level)
    }
    fn plaintext(&self, slots: Vec<Complex64>) -> Result<Self::Block>;
    fn decrypt(&self, key: &SecretKey, x: &Self::Block) -> Result<Vec<Complex64>>;
    /// Slot values of a plaintext block; `None` for ciphertexts.
    fn read_plaintext(&self, x: &Self::Block) -> Option<Vec<Complex64>>;

    fn add(&self, x: &Self::Block, y: &Self::Block) -> Result<Self::Block>;
    fn sub(&self, x: &Self::Block, y: &Self::Block) -> Result<Self::Block>;
    /// `x + i·y`; multiplying by the imaginary unit is depth-free.
    fn add_i(&self, x: &Self::Block, y: &Self::Block) -> Result<Self::Block>;
    fn add_scalar(&self, x: &Self::Block, c: Complex64) -> Self::Block;
    /// Ciphertext × ciphertext (Mult) or ciphertext × plaintext (CMult).
    fn mult(&self, x: &Self::Block, y: &Self::Block) -> Result<Self::Block>;
    fn cmult_scalar(&self, x: &Self::Block, c: Complex64) -> Result<Self::Block>;
    fn lrot(&self, x: &Self::Block, r: usize) -> Self::Block;
    fn rrot(&self, x: &Self::Block, r: usize) -> Self::Block;
    fn conj(&self, x: &Self::Block) -> Self::Block;
    fn bootstrap(&self, x: &Self::Block) -> Self::Block;

    /// Returns `x` with level at least `need`, bootstrapping if the
    /// backend's policy allows it.
    fn ensure_level(&self, x: &Self::Block, need: u32) -> Result<Self::Block>;
}

static NEXT_KEY_ID: AtomicU64 = AtomicU64::new(1);

/// The noise-free emulator.
#[derive(Debug)]
pub struct Emulator {
    ctx: Context,
    ledger: Arc<OpLedger>,
    key_id: u64,
    auto_bootstrap: bool,
}

impl Emulator {
    /// Creates an emulator and the matching secret key. Auto-bootstrap is
    /// enabled.
    pub fn new(ctx: Context) -> Result<(Self, SecretKey)> {
        ctx.validate()?;
        let id = NEXT_KEY_ID.fetch_add(1, Ordering::Relaxed);
        let emu = Emulator {
            ctx,
            ledger: Arc::new(OpLedger::new()),
            key_id: id,
            auto_bootstrap: true,
        };
        Ok((emu, SecretKey { id }))
    }

    pub fn with_auto_bootstrap(mut self, on: bool) -> Self {
        self.auto_bootstrap = on;
        self
    }

    pub fn auto_bootstrap(&self) -> bool {
        self.auto_bootstrap
    }

    pub fn counts(&self) -> OpCounts {
        self.ledger.snapshot()
    }

    pub fn estimated_ms(&self) -> f64 {
        self.counts().estimated_ms(&self.ctx.weights)
    }

    fn check_len(&self, x: &CipherBlock) -> Result<()> {
        if x.slots.len() != self.ctx.slots {
            return Err(Error::ContextMismatch(format!(
                "block has {} slots, context has {}",
                x.slots.len(),
                self.ctx.slots
            )));
        }
        Ok(())
    }

    fn zip(
        &self,
        x: &CipherBlock,
        y: &CipherBlock,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Vec<Complex64>> {
        self.check_len(x)?;
        self.check_len(y)?;
        Ok(x.slots.iter().zip(&y.slots).map(|(&a, &b)| f(a, b)).collect())
    }

    fn min_level(x: &CipherBlock, y: &CipherBlock) -> Option<u32> {
        match (x.level, y.level) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Bootstraps a ciphertext at level 0 so one more multiplication fits.
    fn refresh(&self, x: &CipherBlock) -> Result<CipherBlock> {
        self.ensure_level(x, 1)
    }

    fn additive(
        &self,
        x: &CipherBlock,
        y: &CipherBlock,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<CipherBlock> {
        let slots = self.zip(x, y, f)?;
        let level = Self::min_level(x, y);
        if level.is_some() {
            self.ledger.record(OpKind::Add);
        }
        Ok(CipherBlock { slots, level })
    }
}

impl Backend for Emulator {
    type Block = CipherBlock;

    fn context(&self) -> &Context {
        &self.ctx
    }

    fn ledger(&self) -> &OpLedger {
        &self.ledger
    }

    fn level(&self, x: &CipherBlock) -> Option<u32> {
        x.level
    }

    fn encrypt_at_level(&self, slots: &[Complex64], level: u32) -> Result<CipherBlock> {
        if slots.len() != self.ctx.slots {
            return Err(Error::ContextMismatch(format!(
                "{} values for {} slots",
                slots.len(),
                self.ctx.slots
            )));
        }
        if level > self.ctx.max_level {
            return Err(Error::InvalidContext(format!(
                "level {level} exceeds max_level {}",
                self.ctx.max_level
            )));
        }
        Ok(CipherBlock {
            slots: slots.to_vec(),
            level: Some(level),
        })
    }

    fn plaintext(&self, slots: Vec<Complex64>) -> Result<CipherBlock> {
        let block = CipherBlock { slots, level: None };
        self.check_len(&block)?;
        Ok(block)
    }

    fn decrypt(&self, key: &SecretKey, x: &CipherBlock) -> Result<Vec<Complex64>> {
        if key.id != self.key_id {
            return Err(Error::Protocol("secret key does not match this context".into()));
        }
        self.check_len(x)?;
        Ok(x.slots.clone())
    }

    fn read_plaintext(&self, x: &CipherBlock) -> Option<Vec<Complex64>> {
        x.plain_slots().map(<[Complex64]>::to_vec)
    }

    fn add(&self, x: &CipherBlock, y: &CipherBlock) -> Result<CipherBlock> {
        self.additive(x, y, |a, b| a + b)
    }

    fn sub(&self, x: &CipherBlock, y: &CipherBlock) -> Result<CipherBlock> {
        self.additive(x, y, |a, b| a - b)
    }

    fn add_i(&self, x: &CipherBlock, y: &CipherBlock) -> Result<CipherBlock> {
        self.additive(x, y, |a, b| a + Complex64::i() * b)
    }

    fn add_scalar(&self, x: &CipherBlock, c: Complex64) -> CipherBlock {
        if x.level.is_some() {
            self.ledger.record(OpKind::Add);
        }
        CipherBlock {
            slots: x.slots.iter().map(|&a| a + c).collect(),
            level: x.level,
        }
    }

    fn mult(&self, x: &CipherBlock, y: &CipherBlock) -> Result<CipherBlock> {
        let (x, y) = match (x.level, y.level) {
            (None, None) => {
                let slots = self.zip(x, y, |a, b| a * b)?;
                return Ok(CipherBlock { slots, level: None });
            }
            // A square refreshes its single operand once.
            (Some(_), Some(_)) if std::ptr::eq(x, y) => {
                let x = self.refresh(x)?;
                (x.clone(), x)
            }
            (Some(_), Some(_)) => (self.refresh(x)?, self.refresh(y)?),
            (Some(_), None) => (self.refresh(x)?, y.clone()),
            (None, Some(_)) => (x.clone(), self.refresh(y)?),
        };
        let slots = self.zip(&x, &y, |a, b| a * b)?;
        let both = x.level.is_some() && y.level.is_some();
        self.ledger
            .record(if both { OpKind::Mult } else { OpKind::CMult });
        let level = Self::min_level(&x, &y).map(|l| l - 1);
        Ok(CipherBlock { slots, level })
    }

    fn cmult_scalar(&self, x: &CipherBlock, c: Complex64) -> Result<CipherBlock> {
        if x.level.is_none() {
            return Ok(CipherBlock {
                slots: x.slots.iter().map(|&a| a * c).collect(),
                level: None,
            });
        }
        let x = self.refresh(x)?;
        self.ledger.record(OpKind::CMult);
        Ok(CipherBlock {
            slots: x.slots.iter().map(|&a| a * c).collect(),
            level: x.level.map(|l| l - 1),
        })
    }

    fn lrot(&self, x: &CipherBlock, r: usize) -> CipherBlock {
        let r = r % x.slots.len();
        if r == 0 {
            return x.clone();
        }
        if x.level.is_some() {
            self.ledger.record(OpKind::Rot);
        }
        let mut slots = x.slots.clone();
        slots.rotate_left(r);
        CipherBlock {
            slots,
            level: x.level,
        }
    }

    fn rrot(&self, x: &CipherBlock, r: usize) -> CipherBlock {
        let n = x.slots.len();
        self.lrot(x, (n - r % n) % n)
    }

    fn conj(&self, x: &CipherBlock) -> CipherBlock {
        if x.level.is_some() {
            self.ledger.record(OpKind::Conj);
        }
        CipherBlock {
            slots: x.slots.iter().map(|a| a.conj()).collect(),
            level: x.level,
        }
    }

    fn bootstrap(&self, x: &CipherBlock) -> CipherBlock {
        if x.level.is_none() {
            return x.clone();
        }
        self.ledger.record(OpKind::Bootstrap);
        CipherBlock {
            slots: x.slots.clone(),
            level: Some(self.ctx.max_level),
        }
    }

    fn ensure_level(&self, x: &CipherBlock, need: u32) -> Result<CipherBlock> {
        match x.level {
            Some(have) if have < need => {
                if need > self.ctx.max_level {
                    return Err(Error::DepthExhausted { need, have });
                }
                if self.auto_bootstrap {
                    Ok(self.bootstrap(x))
                } else {
                    Err(Error::DepthExhausted { need, have })
                }
            }
            _ => Ok(x.clone()),
        }
    }
}

/// Converts real values to complex slots.
pub fn real_slots(values: &[f64]) -> Vec<Complex64> {
    values.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}
