//! Encrypted matrix products.
//!
//! - [`diag_abt`]: `t·A·Bᵀ` for `A` (`a × b`, plain layout) and `B`
//!   (`c × b`, vertically tiled). The result is `a × c`, horizontally tiled.
//! - [`diag_atb`]: `t·Aᵀ·B` for `A` (`a × c`, horizontally tiled) and `B`
//!   (`a × b`, plain layout). The result is `c × b`, vertically tiled.
//!
//! Both walk the `c'/2` complexified off-diagonals of the product, where
//! `c' = 2^⌈log2 c⌉`, and recover the real result with one conjugation.
//! [`col_major_abt`] and [`row_major_atb`] are the per-class baselines.

mod bench;
mod counts;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::emulator::Backend;
use crate::encoding::{
    col_sums, col_sums_scaled, complexify_rl, complexify_ru, first_column_mask, prot_up, rot_left,
    rot_up, row_sums, DiagMask, EncodedMatrix, Tiling,
};
use crate::error::{Error, Result};

pub use bench::{bench_context, run_product, BenchRow, BENCH_SLOTS};
pub use counts::{count_formula, Algorithm, MatmulCounts};

type Enc<B> = EncodedMatrix<<B as Backend>::Block>;

/// Levels consumed by [`diag_abt`] and the baselines.
pub const ABT_DEPTH: u32 = 3;

/// Strategy for the left rotations inside [`diag_atb`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AtbPath {
    /// Choose from operand levels: partial rotation when `level(A) < level(B)`.
    #[default]
    Auto,
    /// Rotate `A` left with RL; costs `A` four levels and `B` two.
    RotLeft,
    /// Plain rotation of `A` paired with PRU on `B`; three levels each.
    PartialRotUp,
}

impl AtbPath {
    /// Levels required of `(A, B)`.
    pub fn depth(self) -> (u32, u32) {
        match self {
            AtbPath::RotLeft => (4, 2),
            AtbPath::PartialRotUp | AtbPath::Auto => (3, 3),
        }
    }
}

fn level_of<B: Backend>(backend: &B, m: &Enc<B>) -> u32 {
    m.blocks()
        .iter()
        .filter_map(|b| backend.level(b))
        .min()
        .unwrap_or(u32::MAX)
}

fn ensure<B: Backend>(backend: &B, m: &Enc<B>, need: u32) -> Result<Enc<B>> {
    m.try_map(|b| backend.ensure_level(b, need))
}

fn period_rows<K>(m: &EncodedMatrix<K>) -> Result<usize> {
    match m.tiling() {
        Tiling::Vertical { .. } => Ok(m.padded_shape().0),
        _ => Err(Error::Shape("expected a vertically tiled operand".into())),
    }
}

fn period_cols<K>(m: &EncodedMatrix<K>) -> Result<usize> {
    match m.tiling() {
        Tiling::Horizontal { .. } => Ok(m.padded_shape().1),
        _ => Err(Error::Shape("expected a horizontally tiled operand".into())),
    }
}

fn accumulate<B: Backend>(backend: &B, acc: Option<Enc<B>>, x: Enc<B>) -> Result<Option<Enc<B>>> {
    Ok(Some(match acc {
        None => x,
        Some(a) => a.try_zip(&x, |p, q| backend.add(p, q))?,
    }))
}

/// `X + conj(X)` block by block.
fn real_part_doubled<B: Backend>(backend: &B, x: &Enc<B>) -> Result<Enc<B>> {
    x.try_map(|b| backend.add(b, &backend.conj(b)))
}

/// Multiplies every block of `a` (grid `r × q`) by block `(0, j)` of `row`.
fn mult_by_block_row<B: Backend>(backend: &B, a: &Enc<B>, row: &Enc<B>) -> Result<Enc<B>> {
    let (r, q) = a.grid();
    let blocks = (0..r * q)
        .map(|idx| backend.mult(&a.blocks()[idx], row.block(0, idx % q)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EncodedMatrix::from_parts(blocks, a.grid(), a.shape(), a.padded_shape(), a.tiling()))
}

/// Multiplies block `(i, j)` of `b` by block `(i, 0)` of `col`.
fn mult_by_block_col<B: Backend>(backend: &B, col: &Enc<B>, b: &Enc<B>) -> Result<Enc<B>> {
    let (r, q) = b.grid();
    let blocks = (0..r * q)
        .map(|idx| backend.mult(col.block(idx / q, 0), &b.blocks()[idx]))
        .collect::<Result<Vec<_>>>()?;
    Ok(EncodedMatrix::from_parts(blocks, b.grid(), b.shape(), b.padded_shape(), b.tiling()))
}

fn mask_all<B: Backend>(backend: &B, m: &Enc<B>, mask: &B::Block) -> Result<Enc<B>> {
    m.try_map(|b| backend.mult(b, mask))
}

/// `t·A·Bᵀ` with `A` plain (`a × b`) and `B` vertically tiled (`c × b`).
///
/// Costs `c'·⌈a/s0⌉` CMult, `(c'/2)·⌈a/s0⌉·⌈b/s1⌉` Mult and
/// `(c'/2)(⌈b/s1⌉ + 2⌈a/s0⌉·log2 s1)` Rot; consumes three levels.
pub fn diag_abt<B: Backend>(backend: &B, a: &Enc<B>, b: &Enc<B>, t: f64) -> Result<Enc<B>> {
    let ctx = backend.context();
    let c = period_rows(b)?;
    if a.tiling() != Tiling::None {
        return Err(Error::Shape("left operand of diag_abt must not be tiled".into()));
    }
    if a.shape().1 != b.shape().1 || a.grid().1 != b.grid().1 {
        return Err(Error::Shape(format!(
            "inner dimensions differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let a = ensure(backend, a, ABT_DEPTH)?;
    let b = ensure(backend, b, ABT_DEPTH)?;

    let out = if c == 1 {
        // A single class has no off-diagonals to pair up.
        let prod = mult_by_block_row(backend, &a, &b)?;
        col_sums_scaled(backend, &prod, t)?
    } else {
        let h = c / 2;
        let b_cplx = complexify_ru(backend, &b, c)?;
        let mut acc = None;
        for k in 0..h {
            let rotated = rot_up(backend, &b_cplx, k)?;
            let prod = mult_by_block_row(backend, &a, &rotated)?;
            let sums = col_sums(backend, &prod)?;
            let mask = DiagMask::complexified(k, c).scaled(t).block(backend)?;
            acc = accumulate(backend, acc, mask_all(backend, &sums, &mask)?)?;
        }
        real_part_doubled(backend, &acc.expect("h >= 1"))?
    };
    let copies = ctx.s1 / c;
    Ok(out.with_meta(
        (a.shape().0, b.shape().0),
        (a.padded_shape().0, c),
        Tiling::Horizontal { copies },
    ))
}

/// `t·Aᵀ·B` with `A` horizontally tiled (`a × c`) and `B` plain (`a × b`).
pub fn diag_atb<B: Backend>(backend: &B, a: &Enc<B>, b: &Enc<B>, t: f64, path: AtbPath) -> Result<Enc<B>> {
    let ctx = backend.context();
    let c = period_cols(a)?;
    if b.tiling() != Tiling::None {
        return Err(Error::Shape("right operand of diag_atb must not be tiled".into()));
    }
    if a.shape().0 != b.shape().0 || a.grid().0 != b.grid().0 {
        return Err(Error::Shape(format!(
            "outer dimensions differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let path = match path {
        AtbPath::Auto if level_of(backend, a) < level_of(backend, b) => AtbPath::PartialRotUp,
        AtbPath::Auto => AtbPath::RotLeft,
        p => p,
    };
    let (need_a, need_b) = path.depth();
    let a = ensure(backend, a, need_a)?;
    let b = ensure(backend, b, need_b)?;

    let out = if c == 1 {
        let prod = mult_by_block_col(backend, &a, &b)?;
        let sums = row_sums(backend, &prod)?;
        let mask = DiagMask::new(0, 1).scaled(t).block(backend)?;
        mask_all(backend, &sums, &mask)?
    } else {
        let h = c / 2;
        let a_cplx = complexify_rl(backend, &a, c)?;
        let mut acc = None;
        for k in 0..h {
            let prod = match path {
                AtbPath::PartialRotUp => {
                    let rotated = a_cplx.try_map(|blk| Ok(backend.lrot(blk, k)))?;
                    let shifted = prot_up(backend, &b, k)?;
                    mult_by_block_col(backend, &rotated, &shifted)?
                }
                _ => {
                    let rotated = rot_left(backend, &a_cplx, k)?;
                    mult_by_block_col(backend, &rotated, &b)?
                }
            };
            let sums = row_sums(backend, &prod)?;
            let mask = DiagMask::complexified((c - k) % c, c).scaled(t).block(backend)?;
            acc = accumulate(backend, acc, mask_all(backend, &sums, &mask)?)?;
        }
        real_part_doubled(backend, &acc.expect("h >= 1"))?
    };
    let copies = ctx.s0 / c;
    Ok(out.with_meta(
        (a.shape().1, b.shape().1),
        (c, b.padded_shape().1),
        Tiling::Vertical { copies },
    ))
}

/// Baseline `A·Bᵀ`, one class row at a time, with `B` in plain layout.
///
/// For each row `r` of `B`: mask it out, broadcast it down the block,
/// multiply with `A`, sum each row into column 0 and move it to column `r`.
pub fn col_major_abt<B: Backend>(backend: &B, a: &Enc<B>, b: &Enc<B>) -> Result<Enc<B>> {
    let ctx = backend.context();
    let (s0, s1) = (ctx.s0, ctx.s1);
    let c = b.shape().0;
    if a.tiling() != Tiling::None || b.tiling() != Tiling::None || b.grid().0 != 1 {
        return Err(Error::Shape("col_major_abt expects plain layouts and c ≤ s0".into()));
    }
    if c > s1 || a.grid().1 != b.grid().1 {
        return Err(Error::Shape(format!("cannot multiply {:?} by {:?}ᵀ", a.shape(), b.shape())));
    }
    let a = ensure(backend, a, ABT_DEPTH)?;
    let b = ensure(backend, b, ABT_DEPTH)?;
    let first = first_column_mask(backend, 1.0)?;
    let mut acc = None;
    for r in 0..c {
        let row = crate::encoding::row_mask_block(backend, r)?;
        let broadcast = b.try_map(|blk| {
            let mut x = backend.mult(blk, &row)?;
            for i in 0..s0.trailing_zeros() {
                x = backend.add(&x, &backend.rrot(&x, (1 << i) * s1))?;
            }
            Ok(x)
        })?;
        let prod = mult_by_block_row(backend, &a, &broadcast)?;
        let summed = sum_rows_into_first_column(backend, &prod)?;
        let placed = summed.try_map(|blk| {
            let x = backend.mult(blk, &first)?;
            Ok(backend.rrot(&x, r))
        })?;
        acc = accumulate(backend, acc, placed)?;
    }
    let out = acc.ok_or_else(|| Error::Shape("empty class dimension".into()))?;
    Ok(out.with_meta((a.shape().0, c), (a.padded_shape().0, s1), Tiling::None))
}

/// Adds block columns and folds every row into its column 0 (other columns
/// hold partial sums).
fn sum_rows_into_first_column<B: Backend>(backend: &B, m: &Enc<B>) -> Result<Enc<B>> {
    let s1 = backend.context().s1;
    let (rows, cols) = m.grid();
    let blocks = (0..rows)
        .map(|bi| {
            let mut x = m.block(bi, 0).clone();
            for bj in 1..cols {
                x = backend.add(&x, m.block(bi, bj))?;
            }
            for i in 0..s1.trailing_zeros() {
                x = backend.add(&x, &backend.lrot(&x, 1 << i))?;
            }
            Ok(x)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EncodedMatrix::from_parts(blocks, (rows, 1), m.shape(), m.padded_shape(), Tiling::None))
}

/// Baseline `Aᵀ·B`, one class column at a time, with `A` in plain layout.
///
/// For each column `r` of `A`: mask it out, move it to column 0, broadcast
/// it across the row, multiply with `B`, sum down the rows and keep row `r`.
pub fn row_major_atb<B: Backend>(backend: &B, a: &Enc<B>, b: &Enc<B>) -> Result<Enc<B>> {
    let ctx = backend.context();
    let (s0, s1) = (ctx.s0, ctx.s1);
    let c = a.shape().1;
    if a.tiling() != Tiling::None || b.tiling() != Tiling::None || a.grid().1 != 1 {
        return Err(Error::Shape("row_major_atb expects plain layouts and c ≤ s1".into()));
    }
    if c > s0 || a.grid().0 != b.grid().0 {
        return Err(Error::Shape(format!("cannot multiply {:?}ᵀ by {:?}", a.shape(), b.shape())));
    }
    let a = ensure(backend, a, ABT_DEPTH)?;
    let b = ensure(backend, b, ABT_DEPTH)?;
    let mut acc = None;
    for r in 0..c {
        let col = crate::encoding::column_mask(backend, 1.0, |j| j == r)?;
        let spread = a.try_map(|blk| {
            let x = backend.mult(blk, &col)?;
            let mut x = backend.lrot(&x, r);
            for i in 0..s1.trailing_zeros() {
                x = backend.add(&x, &backend.rrot(&x, 1 << i))?;
            }
            Ok(x)
        })?;
        let prod = mult_by_block_col(backend, &spread, &b)?;
        let sums = row_sums(backend, &prod)?;
        let row = crate::encoding::row_mask_block(backend, r)?;
        acc = accumulate(backend, acc, mask_all(backend, &sums, &row)?)?;
    }
    let out = acc.ok_or_else(|| Error::Shape("empty class dimension".into()))?;
    Ok(out.with_meta((c, b.shape().1), (s0, b.padded_shape().1), Tiling::None))
}

/// Scalar multiple of every block.
pub fn scale<B: Backend>(backend: &B, m: &Enc<B>, t: f64) -> Result<Enc<B>> {
    m.try_map(|b| backend.cmult_scalar(b, Complex64::new(t, 0.0)))
}
