//! Structural primitives: row/column rotations and broadcast sums.

use super::mask::{column_mask, first_column_mask};
use super::EncodedMatrix;
use crate::emulator::Backend;
use crate::error::{Error, Result};

type Enc<B> = EncodedMatrix<<B as Backend>::Block>;

fn log2(n: usize) -> usize {
    n.trailing_zeros() as usize
}

/// RU: rotates rows upward by `k` within each band of `s0` rows,
/// `B'[i, j] = B[(i + k) mod s0, j]`. One rotation per block, no depth.
pub fn rot_up<B: Backend>(backend: &B, m: &Enc<B>, k: usize) -> Result<Enc<B>> {
    let s0 = backend.context().s0;
    let s1 = backend.context().s1;
    let k = k % s0;
    if k == 0 {
        return Ok(m.clone());
    }
    m.try_map(|b| Ok(backend.lrot(b, k * s1)))
}

/// RL: rotates columns left by `k` within each band of `s1` columns
/// (mask, left rotation, then a one-row right rotation of the wrapped part).
/// One CMult and two rotations per block; consumes one level.
pub fn rot_left<B: Backend>(backend: &B, m: &Enc<B>, k: usize) -> Result<Enc<B>> {
    let s1 = backend.context().s1;
    let k = k % s1;
    if k == 0 {
        return Ok(m.clone());
    }
    let keep = column_mask(backend, 1.0, |j| j < s1 - k)?;
    m.try_map(|b| {
        let a1 = backend.lrot(b, k);
        let a2 = backend.mult(&a1, &keep)?;
        let wrapped = backend.sub(&a1, &a2)?;
        backend.add(&a2, &backend.rrot(&wrapped, s1))
    })
}

/// PRU: rotates the last `k` columns of each block upward by one row.
/// One CMult and one rotation per block; consumes one level.
pub fn prot_up<B: Backend>(backend: &B, m: &Enc<B>, k: usize) -> Result<Enc<B>> {
    let s1 = backend.context().s1;
    let k = k % s1;
    if k == 0 {
        return Ok(m.clone());
    }
    let keep = column_mask(backend, 1.0, |j| j < s1 - k)?;
    m.try_map(|b| {
        let kept = backend.mult(b, &keep)?;
        let tail = backend.sub(b, &kept)?;
        backend.add(&kept, &backend.lrot(&tail, s1))
    })
}

/// Adds the blocks of each block row into a single block column.
fn presum_columns<B: Backend>(backend: &B, m: &Enc<B>) -> Result<Vec<B::Block>> {
    let (rows, cols) = m.grid;
    (0..rows)
        .map(|bi| {
            let mut acc = m.block(bi, 0).clone();
            for bj in 1..cols {
                acc = backend.add(&acc, m.block(bi, bj))?;
            }
            Ok(acc)
        })
        .collect()
}

/// CS: every column becomes the sum of all columns of its row.
///
/// The block columns are added first; each block then takes `log2 s1`
/// rotate-and-add steps, keeps column 0 and broadcasts it back with another
/// `log2 s1` steps. The result has a single block column.
pub fn col_sums<B: Backend>(backend: &B, m: &Enc<B>) -> Result<Enc<B>> {
    col_sums_scaled(backend, m, 1.0)
}

/// CS with the column-0 mask scaled by `t`, so the sums come out times `t`
/// at no extra cost.
pub fn col_sums_scaled<B: Backend>(backend: &B, m: &Enc<B>, t: f64) -> Result<Enc<B>> {
    let s1 = backend.context().s1;
    let first = first_column_mask(backend, t)?;
    let blocks = presum_columns(backend, m)?
        .into_iter()
        .map(|mut b| {
            for i in 0..log2(s1) {
                b = backend.add(&b, &backend.lrot(&b, 1 << i))?;
            }
            b = backend.mult(&b, &first)?;
            for i in 0..log2(s1) {
                b = backend.add(&b, &backend.rrot(&b, 1 << i))?;
            }
            Ok(b)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = m.grid.0;
    Ok(EncodedMatrix::from_parts(
        blocks,
        (rows, 1),
        (m.shape.0, s1.min(m.padded.1)),
        (m.padded.0, s1),
        super::Tiling::None,
    ))
}

/// RS: every row becomes the sum of all rows of its column.
///
/// The block rows are added first, then each block takes `log2 s0`
/// rotate-and-add steps by multiples of `s1`. Depth-free. The result has a
/// single block row.
pub fn row_sums<B: Backend>(backend: &B, m: &Enc<B>) -> Result<Enc<B>> {
    let (s0, s1) = (backend.context().s0, backend.context().s1);
    let (rows, cols) = m.grid;
    let blocks = (0..cols)
        .map(|bj| {
            let mut b = m.block(0, bj).clone();
            for bi in 1..rows {
                b = backend.add(&b, m.block(bi, bj))?;
            }
            for i in 0..log2(s0) {
                b = backend.add(&b, &backend.lrot(&b, (1 << i) * s1))?;
            }
            Ok(b)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EncodedMatrix::from_parts(
        blocks,
        (1, cols),
        (s0.min(m.padded.0), m.shape.1),
        (s0, m.padded.1),
        super::Tiling::None,
    ))
}

fn check_even(c: usize) -> Result<()> {
    if c < 2 || c % 2 != 0 {
        return Err(Error::Encoding(format!("complexification needs an even period, got {c}")));
    }
    Ok(())
}

/// `B + i·RU(B, c/2)`: packs two row-rotated copies into real and
/// imaginary parts. Depth-free.
pub fn complexify_ru<B: Backend>(backend: &B, m: &Enc<B>, c: usize) -> Result<Enc<B>> {
    check_even(c)?;
    let rotated = rot_up(backend, m, c / 2)?;
    m.try_zip(&rotated, |x, y| backend.add_i(x, y))
}

/// `A + i·RL(A, c/2)`. Consumes one level through RL.
pub fn complexify_rl<B: Backend>(backend: &B, m: &Enc<B>, c: usize) -> Result<Enc<B>> {
    check_even(c)?;
    let rotated = rot_left(backend, m, c / 2)?;
    m.try_zip(&rotated, |x, y| backend.add_i(x, y))
}
