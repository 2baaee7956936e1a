//! Block encoding of matrices and the structural primitives built on it.
//!
//! A matrix is zero padded and split into `s0 × s1` units; each unit is
//! stored row-major in one block, entry `(i, j)` at slot `i·s1 + j`.
//! Small matrices can instead be tiled: a `c × b` matrix padded to
//! `c' = 2^⌈log2 c⌉` rows is repeated `s0 / c'` times down a single block
//! row (vertical tiling), and an `a × c` matrix is repeated `s1 / c'` times
//! across a single block column (horizontal tiling).
//!
//! The primitives work block-locally: rows roll within each band of `s0`
//! rows and columns within each band of `s1` columns. On tiled operands
//! this is exactly a roll modulo the tile period.

mod mask;
mod ops;

use ndarray::Array2;
use num_complex::Complex64;

use crate::emulator::{Backend, Context, SecretKey};
use crate::error::{Error, Result};

pub use mask::{column_mask, first_column_mask, row_mask_block, DiagMask};
pub use ops::{
    col_sums, col_sums_scaled, complexify_rl, complexify_ru, prot_up, rot_left, rot_up, row_sums,
};

/// Largest imaginary part tolerated when decoding.
pub const IMAG_TOLERANCE: f64 = 1e-9;

/// How a matrix is laid out in its block grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tiling {
    None,
    /// `copies` repetitions of the padded matrix stacked vertically.
    Vertical { copies: usize },
    /// `copies` repetitions of the padded matrix side by side.
    Horizontal { copies: usize },
}

impl Tiling {
    /// Vertical tiling that fills one block row.
    pub fn fill_vertical(ctx: &Context, rows: usize) -> Result<Self> {
        let period = rows.max(1).next_power_of_two();
        if period > ctx.s0 {
            return Err(Error::Encoding(format!(
                "{rows} rows cannot be tiled into {}-row units",
                ctx.s0
            )));
        }
        Ok(Tiling::Vertical {
            copies: ctx.s0 / period,
        })
    }

    /// Horizontal tiling that fills one block column.
    pub fn fill_horizontal(ctx: &Context, cols: usize) -> Result<Self> {
        let period = cols.max(1).next_power_of_two();
        if period > ctx.s1 {
            return Err(Error::Encoding(format!(
                "{cols} columns cannot be tiled into {}-column units",
                ctx.s1
            )));
        }
        Ok(Tiling::Horizontal {
            copies: ctx.s1 / period,
        })
    }
}

/// A matrix held as a grid of blocks.
#[derive(Debug, Clone)]
pub struct EncodedMatrix<K> {
    pub(crate) blocks: Vec<K>,
    pub(crate) grid: (usize, usize),
    pub(crate) shape: (usize, usize),
    pub(crate) padded: (usize, usize),
    pub(crate) tiling: Tiling,
}

impl<K> EncodedMatrix<K> {
    pub(crate) fn from_parts(
        blocks: Vec<K>,
        grid: (usize, usize),
        shape: (usize, usize),
        padded: (usize, usize),
        tiling: Tiling,
    ) -> Self {
        debug_assert_eq!(blocks.len(), grid.0 * grid.1);
        EncodedMatrix {
            blocks,
            grid,
            shape,
            padded,
            tiling,
        }
    }

    /// Logical `(rows, cols)`.
    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    /// Padded size of the stored matrix (one tile period when tiled).
    pub fn padded_shape(&self) -> (usize, usize) {
        self.padded
    }

    /// `(block rows, block columns)`.
    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    pub fn tiling(&self) -> Tiling {
        self.tiling
    }

    pub fn blocks(&self) -> &[K] {
        &self.blocks
    }

    pub fn block(&self, bi: usize, bj: usize) -> &K {
        &self.blocks[bi * self.grid.1 + bj]
    }

    pub(crate) fn with_meta(mut self, shape: (usize, usize), padded: (usize, usize), tiling: Tiling) -> Self {
        self.shape = shape;
        self.padded = padded;
        self.tiling = tiling;
        self
    }
}

impl<K: Clone> EncodedMatrix<K> {
    /// Applies `f` to every block.
    pub fn try_map<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(&K) -> Result<K>,
    {
        let blocks = self.blocks.iter().map(f).collect::<Result<Vec<_>>>()?;
        Ok(EncodedMatrix { blocks, ..self.clone_meta() })
    }

    /// Combines two matrices with the same grid block by block.
    pub fn try_zip<F>(&self, other: &Self, f: F) -> Result<Self>
    where
        F: Fn(&K, &K) -> Result<K>,
    {
        if self.grid != other.grid {
            return Err(Error::Encoding(format!(
                "grid mismatch {:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| f(a, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(EncodedMatrix { blocks, ..self.clone_meta() })
    }

    fn clone_meta(&self) -> Self {
        EncodedMatrix {
            blocks: Vec::new(),
            grid: self.grid,
            shape: self.shape,
            padded: self.padded,
            tiling: self.tiling,
        }
    }
}

/// Grid and padded shape for a matrix under a tiling.
fn layout(ctx: &Context, rows: usize, cols: usize, tiling: Tiling) -> Result<((usize, usize), (usize, usize))> {
    let (s0, s1) = (ctx.s0, ctx.s1);
    let unit_pad = |n: usize, unit: usize| n.max(1).div_ceil(unit) * unit;
    match tiling {
        Tiling::None => {
            let padded = (unit_pad(rows, s0), unit_pad(cols, s1));
            Ok(((padded.0 / s0, padded.1 / s1), padded))
        }
        Tiling::Vertical { copies } => {
            let period = rows.max(1).next_power_of_two();
            if copies == 0 || period * copies != s0 {
                return Err(Error::Encoding(format!(
                    "{copies} vertical copies of {period} rows do not fill {s0}-row units"
                )));
            }
            let padded = (period, unit_pad(cols, s1));
            Ok(((1, padded.1 / s1), padded))
        }
        Tiling::Horizontal { copies } => {
            let period = cols.max(1).next_power_of_two();
            if copies == 0 || period * copies != s1 {
                return Err(Error::Encoding(format!(
                    "{copies} horizontal copies of {period} columns do not fill {s1}-column units"
                )));
            }
            let padded = (unit_pad(rows, s0), period);
            Ok(((padded.0 / s0, 1), padded))
        }
    }
}

/// Slot vectors of every block, the block grid and the padded shape.
type Packed = (Vec<Vec<Complex64>>, (usize, usize), (usize, usize));

/// Slot vectors of every block, row-major over the grid.
fn pack(ctx: &Context, a: &Array2<f64>, tiling: Tiling) -> Result<Packed> {
    let (rows, cols) = a.dim();
    let (grid, padded) = layout(ctx, rows, cols, tiling)?;
    let (s0, s1) = (ctx.s0, ctx.s1);
    let mut out = Vec::with_capacity(grid.0 * grid.1);
    for bi in 0..grid.0 {
        for bj in 0..grid.1 {
            let mut slots = vec![Complex64::new(0.0, 0.0); s0 * s1];
            for i in 0..s0 {
                let gi = bi * s0 + i;
                let r = match tiling {
                    Tiling::Vertical { .. } => gi % padded.0,
                    _ => gi,
                };
                if r >= rows {
                    continue;
                }
                for j in 0..s1 {
                    let gj = bj * s1 + j;
                    let c = match tiling {
                        Tiling::Horizontal { .. } => gj % padded.1,
                        _ => gj,
                    };
                    if c < cols {
                        slots[i * s1 + j] = Complex64::new(a[[r, c]], 0.0);
                    }
                }
            }
            out.push(slots);
        }
    }
    Ok((out, grid, padded))
}

/// Encrypts `a` at the context's maximum level.
pub fn encode<B: Backend>(backend: &B, a: &Array2<f64>, tiling: Tiling) -> Result<EncodedMatrix<B::Block>> {
    encode_at_level(backend, a, tiling, backend.context().max_level)
}

pub fn encode_at_level<B: Backend>(
    backend: &B,
    a: &Array2<f64>,
    tiling: Tiling,
    level: u32,
) -> Result<EncodedMatrix<B::Block>> {
    let (slots, grid, padded) = pack(backend.context(), a, tiling)?;
    let blocks = slots
        .iter()
        .map(|s| backend.encrypt_at_level(s, level))
        .collect::<Result<Vec<_>>>()?;
    Ok(EncodedMatrix::from_parts(blocks, grid, a.dim(), padded, tiling))
}

/// Encodes `a` as unencrypted plaintext blocks.
pub fn encode_plain<B: Backend>(backend: &B, a: &Array2<f64>, tiling: Tiling) -> Result<EncodedMatrix<B::Block>> {
    let (slots, grid, padded) = pack(backend.context(), a, tiling)?;
    let blocks = slots
        .into_iter()
        .map(|s| backend.plaintext(s))
        .collect::<Result<Vec<_>>>()?;
    Ok(EncodedMatrix::from_parts(blocks, grid, a.dim(), padded, tiling))
}

/// Reads the logical matrix back, stripping padding and tiling.
///
/// Ciphertext blocks need `key`; plaintext-only matrices decode without it.
pub fn decode<B>(backend: &B, key: Option<&SecretKey>, e: &EncodedMatrix<B::Block>) -> Result<Array2<f64>>
where
    B: Backend,
{
    let ctx = backend.context();
    let (s0, s1) = (ctx.s0, ctx.s1);
    let (rows, cols) = e.shape;
    let mut out = Array2::zeros((rows, cols));
    let mut cache: Vec<Option<Vec<Complex64>>> = vec![None; e.blocks.len()];
    for r in 0..rows {
        for c in 0..cols {
            let (bi, i) = (r / s0, r % s0);
            let (bj, j) = (c / s1, c % s1);
            let idx = bi * e.grid.1 + bj;
            if cache[idx].is_none() {
                let block = &e.blocks[idx];
                let slots = match backend.level(block) {
                    None => plain_slots(backend, block)?,
                    Some(_) => {
                        let key = key.ok_or_else(|| {
                            Error::Protocol("decoding a ciphertext requires the secret key".into())
                        })?;
                        backend.decrypt(key, block)?
                    }
                };
                cache[idx] = Some(slots);
            }
            let slot = i * s1 + j;
            let v = cache[idx].as_ref().expect("filled above")[slot];
            if v.im.abs() >= IMAG_TOLERANCE {
                return Err(Error::ResidualImaginary {
                    slot,
                    magnitude: v.im.abs(),
                });
            }
            out[[r, c]] = v.re;
        }
    }
    Ok(out)
}

fn plain_slots<B: Backend>(backend: &B, block: &B::Block) -> Result<Vec<Complex64>> {
    backend
        .read_plaintext(block)
        .ok_or_else(|| Error::Encoding("block is not a plaintext".into()))
}
