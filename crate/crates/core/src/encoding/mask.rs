//! Plaintext masks. All masks are periodic inside a block, so one
//! plaintext block serves every position of a grid.

use num_complex::Complex64;

use crate::emulator::Backend;
use crate::error::{Error, Result};

/// Off-diagonal mask `M^{(k,d)}`: entry `(i, j)` is 1 iff `j ≡ i + k (mod d)`.
///
/// The complexified form is `½M^{(k,d)} − (i/2)M^{(k+d/2,d)}`, which picks
/// the real part of a complexified product at diagonal `k` and the imaginary
/// part at diagonal `k + d/2`. `scale` multiplies every entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagMask {
    pub k: usize,
    pub d: usize,
    pub complexified: bool,
    pub scale: f64,
}

impl DiagMask {
    pub fn new(k: usize, d: usize) -> Self {
        DiagMask {
            k,
            d,
            complexified: false,
            scale: 1.0,
        }
    }

    pub fn complexified(k: usize, d: usize) -> Self {
        DiagMask {
            complexified: true,
            ..Self::new(k, d)
        }
    }

    pub fn scaled(mut self, t: f64) -> Self {
        self.scale = t;
        self
    }

    fn on_diag(k: usize, d: usize, i: usize, j: usize) -> bool {
        j % d == (i + k) % d
    }

    /// Entry `(i, j)` of the mask.
    pub fn value(&self, i: usize, j: usize) -> Complex64 {
        let (k, d) = (self.k, self.d);
        let real = if Self::on_diag(k, d, i, j) { 1.0 } else { 0.0 };
        if !self.complexified {
            return Complex64::new(self.scale * real, 0.0);
        }
        let imag = if Self::on_diag(k + d / 2, d, i, j) { 1.0 } else { 0.0 };
        Complex64::new(0.5 * self.scale * real, -0.5 * self.scale * imag)
    }

    fn validate(&self, s0: usize, s1: usize) -> Result<()> {
        if self.d == 0 || self.k >= self.d || s0 % self.d != 0 || s1 % self.d != 0 {
            return Err(Error::Encoding(format!(
                "mask M^({},{}) does not tile {s0}x{s1} units",
                self.k, self.d
            )));
        }
        if self.complexified && self.d % 2 != 0 {
            return Err(Error::Encoding("complexified mask needs an even modulus".into()));
        }
        Ok(())
    }

    /// The mask as one plaintext block.
    pub fn block<B: Backend>(&self, backend: &B) -> Result<B::Block> {
        let ctx = backend.context();
        self.validate(ctx.s0, ctx.s1)?;
        local_mask(backend, |i, j| self.value(i, j))
    }
}

/// Plaintext block whose entry `(i, j)` is `f(i, j)` in block coordinates.
pub(crate) fn local_mask<B: Backend>(
    backend: &B,
    f: impl Fn(usize, usize) -> Complex64,
) -> Result<B::Block> {
    let (s0, s1) = (backend.context().s0, backend.context().s1);
    let mut slots = Vec::with_capacity(s0 * s1);
    for i in 0..s0 {
        for j in 0..s1 {
            slots.push(f(i, j));
        }
    }
    backend.plaintext(slots)
}

/// Block with `value` in columns where `keep(j)` holds and 0 elsewhere.
pub fn column_mask<B: Backend>(
    backend: &B,
    value: f64,
    keep: impl Fn(usize) -> bool,
) -> Result<B::Block> {
    local_mask(backend, |_, j| {
        Complex64::new(if keep(j) { value } else { 0.0 }, 0.0)
    })
}

/// Block with `value` in column 0 of every row.
pub fn first_column_mask<B: Backend>(backend: &B, value: f64) -> Result<B::Block> {
    column_mask(backend, value, |j| j == 0)
}

/// Block with 1 in row `r` of the unit and 0 elsewhere.
pub fn row_mask_block<B: Backend>(backend: &B, r: usize) -> Result<B::Block> {
    local_mask(backend, |i, _| Complex64::new(if i == r { 1.0 } else { 0.0 }, 0.0))
}
