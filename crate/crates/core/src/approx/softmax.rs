//! Encrypted approximations over [`EncodedMatrix`] operands.

use super::kernels::{self, Arith, Cipher};
use super::SoftmaxConfig;
use crate::emulator::Backend;
use crate::encoding::{column_mask, first_column_mask, EncodedMatrix, Tiling};
use crate::error::{Error, Result};

type Enc<B> = EncodedMatrix<<B as Backend>::Block>;

fn log2(n: usize) -> usize {
    n.trailing_zeros() as usize
}

/// Slot-wise `e^x` on `[−B, B]`.
pub fn a_exp<B: Backend>(backend: &B, m: &Enc<B>, cfg: &SoftmaxConfig) -> Result<Enc<B>> {
    cfg.validate()?;
    m.try_map(|x| kernels::exp(&Cipher(backend), x, cfg.exp_range))
}

/// Slot-wise `1/x` on `(0, R_inv]`.
pub fn a_inv<B: Backend>(backend: &B, m: &Enc<B>, cfg: &SoftmaxConfig) -> Result<Enc<B>> {
    cfg.validate()?;
    m.try_map(|x| kernels::inv(&Cipher(backend), x, cfg.inv_range, cfg.inv_iters))
}

/// Slot-wise `[a > b]` for entries in `[−½, ½]`.
pub fn a_comp<B: Backend>(backend: &B, a: &Enc<B>, b: &Enc<B>, cfg: &SoftmaxConfig) -> Result<Enc<B>> {
    cfg.validate()?;
    let ar = Cipher(backend);
    a.try_zip(b, |x, y| kernels::comp(&ar, &ar.sub(x, y)?, cfg))
}

pub fn domain_extend<B: Backend>(backend: &B, m: &Enc<B>, cfg: &SoftmaxConfig) -> Result<Enc<B>> {
    cfg.validate()?;
    m.try_map(|x| kernels::domain_extend(&Cipher(backend), x, cfg))
}

pub fn precision_correction<B: Backend>(backend: &B, m: &Enc<B>, cfg: &SoftmaxConfig) -> Result<Enc<B>> {
    cfg.validate()?;
    m.try_map(|x| kernels::precision_correction(&Cipher(backend), x, cfg))
}

/// Row layout of a softmax operand: `(c, c')`.
fn row_layout<B: Backend>(backend: &B, m: &Enc<B>) -> Result<(usize, usize)> {
    let s1 = backend.context().s1;
    let c = m.shape().1;
    let cp = c.max(1).next_power_of_two();
    match m.tiling() {
        Tiling::Horizontal { copies } if copies * cp == s1 && m.grid().1 == 1 => Ok((c, cp)),
        t => Err(Error::Shape(format!(
            "row-wise operations need a horizontally tiled a×c matrix, got {t:?} with shape {:?}",
            m.shape()
        ))),
    }
}

struct Masks<K> {
    /// `−½` on pad columns, 0 elsewhere; `None` when there are none.
    pad: Option<K>,
    /// `R_max` on column 0.
    first: K,
    /// 1 on the first `c` columns.
    valid: K,
    /// 1 on column 0.
    first_unit: K,
}

fn masks<B: Backend>(backend: &B, c: usize, cp: usize, cfg: &SoftmaxConfig) -> Result<Masks<B::Block>> {
    let pad = if c < cp {
        Some(column_mask(backend, -0.5, |j| j % cp >= c)?)
    } else {
        None
    };
    Ok(Masks {
        pad,
        first: first_column_mask(backend, cfg.r_max())?,
        valid: column_mask(backend, 1.0, |j| j < c)?,
        first_unit: first_column_mask(backend, 1.0)?,
    })
}

/// Tournament over each tile period; column 0 ends up holding the scaled
/// row maximum, which is then unscaled and broadcast to every column.
fn max_block<B: Backend>(
    backend: &B,
    x: &B::Block,
    mk: &Masks<B::Block>,
    cp: usize,
    cfg: &SoftmaxConfig,
) -> Result<B::Block> {
    let ar = Cipher(backend);
    let s1 = backend.context().s1;
    let mut v = ar.scale(x, 1.0 / cfg.r_max())?;
    if let Some(pad) = &mk.pad {
        v = backend.add(&v, pad)?;
    }
    for j in 0..log2(cp) {
        let rot = backend.lrot(&v, 1 << j);
        v = kernels::amax2(&ar, &v, &rot, cfg)?;
    }
    let mut m = backend.mult(&backend.ensure_level(&v, 1)?, &mk.first)?;
    for j in 0..log2(s1) {
        m = backend.add(&m, &backend.rrot(&m, 1 << j))?;
    }
    Ok(m)
}

/// Row-wise approximate maximum, broadcast to every slot of the row.
///
/// `m` must be an `a × c` matrix horizontally tiled with period
/// `c' = 2^⌈log2 c⌉`, as produced by `diag_abt`. Entries must lie in
/// `[−R_max/2, R_max/2]`.
pub fn a_max<B: Backend>(backend: &B, m: &Enc<B>, cfg: &SoftmaxConfig) -> Result<Enc<B>> {
    cfg.validate()?;
    let (c, cp) = row_layout(backend, m)?;
    let mk = masks(backend, c, cp, cfg)?;
    m.try_map(|x| max_block(backend, x, &mk, cp, cfg))
}

/// Row-wise approximate softmax.
///
/// Takes and returns an `a × c` matrix horizontally tiled with period `c'`,
/// so the output feeds `diag_atb` directly. Entries must lie in
/// `[−coverage, coverage]` (see [`SoftmaxConfig::coverage`]).
pub fn a_softmax<B: Backend>(backend: &B, m: &Enc<B>, cfg: &SoftmaxConfig) -> Result<Enc<B>> {
    cfg.validate()?;
    let (c, cp) = row_layout(backend, m)?;
    let s1 = backend.context().s1;
    let mk = masks(backend, c, cp, cfg)?;
    let ar = Cipher(backend);
    m.try_map(|x| {
        let mx = max_block(backend, x, &mk, cp, cfg)?;
        let mut y = backend.mult(&backend.sub(x, &mx)?, &mk.valid)?;
        y = kernels::domain_extend(&ar, &y, cfg)?;
        if cfg.precise {
            y = kernels::precision_correction(&ar, &y, cfg)?;
        }
        let e = kernels::exp(&ar, &y, cfg.exp_range)?;
        let e = backend.mult(&backend.ensure_level(&e, 1)?, &mk.valid)?;

        let mut sum = e.clone();
        for j in 0..log2(s1) {
            sum = backend.add(&sum, &backend.lrot(&sum, 1 << j))?;
        }
        sum = backend.mult(&backend.ensure_level(&sum, 1)?, &mk.first_unit)?;
        for j in 0..log2(s1) {
            sum = backend.add(&sum, &backend.rrot(&sum, 1 << j))?;
        }
        let z = kernels::inv(&ar, &sum, cfg.inv_range, cfg.inv_iters)?;
        let mut p = backend.mult(&backend.ensure_level(&e, 1)?, &backend.ensure_level(&z, 1)?)?;
        for j in 0..log2(s1 / cp) {
            p = backend.add(&p, &backend.rrot(&p, (1 << j) * cp))?;
        }
        Ok(p)
    })
}

