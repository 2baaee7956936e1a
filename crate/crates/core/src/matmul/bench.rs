//! Running one product on random inputs, with counts and an oracle check.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{col_major_abt, count_formula, diag_abt, diag_atb, row_major_atb, Algorithm, AtbPath, MatmulCounts};
use crate::emulator::{Backend, Context, OpCounts, SecretKey};
use crate::encoding::{decode, encode, Tiling};
use crate::error::{Error, Result};

/// Slot count of the reference benchmark context.
pub const BENCH_SLOTS: usize = 1 << 15;

/// One benchmark row. `counts` are executed ledger deltas, or the formula
/// for algorithms that are only estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub algorithm: Algorithm,
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub s0: usize,
    pub s1: usize,
    pub executed: bool,
    pub counts: MatmulCounts,
    pub formula: MatmulCounts,
    pub estimated_ms: f64,
    /// Relative Frobenius error against the dense product.
    pub rel_error: Option<f64>,
}

/// Context with `s0 = a` (rounded up to a power of two) over
/// [`BENCH_SLOTS`] slots.
pub fn bench_context(a: usize) -> Result<Context> {
    Context::with_slots(BENCH_SLOTS, a.max(1).next_power_of_two().min(BENCH_SLOTS), Context::DEFAULT_MAX_LEVEL)
}

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

fn rel_frobenius(got: &Array2<f64>, want: &Array2<f64>) -> f64 {
    let diff = (got - want).mapv(|v| v * v).sum().sqrt();
    diff / want.mapv(|v| v * v).sum().sqrt().max(f64::MIN_POSITIVE)
}

/// Runs `alg` for the shape `(a, b, c)`: `A·Bᵀ` with `A: a × b` and
/// `B: c × b`, or `Aᵀ·B` with `A: a × c` and `B: a × b`. Inputs are fresh
/// ciphertexts at the maximum level, so no bootstraps occur.
pub fn run_product<B: Backend>(
    backend: &B,
    key: &SecretKey,
    alg: Algorithm,
    (a, b, c): (usize, usize, usize),
    seed: u64,
) -> Result<BenchRow> {
    let ctx = backend.context().clone();
    let formula = count_formula(alg, a, b, c, ctx.s0, ctx.s1);
    let mut row = BenchRow {
        algorithm: alg,
        a,
        b,
        c,
        s0: ctx.s0,
        s1: ctx.s1,
        executed: alg.executable(),
        counts: formula,
        formula,
        estimated_ms: 0.0,
        rel_error: None,
    };
    if !alg.executable() {
        let est = OpCounts { cmult: formula.cmult, mult: formula.mult, rot: formula.rot, ..Default::default() };
        row.estimated_ms = est.estimated_ms(&ctx.weights);
        return Ok(row);
    }
    if a == 0 || b == 0 || c == 0 {
        return Err(Error::Shape(format!("empty shape ({a}, {b}, {c})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let abt = matches!(alg, Algorithm::DiagAbt | Algorithm::ColMajor);
    let (lhs, rhs) = if abt {
        (random(a, b, &mut rng), random(c, b, &mut rng))
    } else {
        (random(a, c, &mut rng), random(a, b, &mut rng))
    };
    let (lt, rt) = match alg {
        Algorithm::DiagAbt => (Tiling::None, Tiling::fill_vertical(&ctx, c)?),
        Algorithm::DiagAtbRl | Algorithm::DiagAtbPru => (Tiling::fill_horizontal(&ctx, c)?, Tiling::None),
        _ => (Tiling::None, Tiling::None),
    };
    let le = encode(backend, &lhs, lt)?;
    let re = encode(backend, &rhs, rt)?;
    let before = backend.ledger().snapshot();
    let out = match alg {
        Algorithm::DiagAbt => diag_abt(backend, &le, &re, 1.0)?,
        Algorithm::DiagAtbRl => diag_atb(backend, &le, &re, 1.0, AtbPath::RotLeft)?,
        Algorithm::DiagAtbPru => diag_atb(backend, &le, &re, 1.0, AtbPath::PartialRotUp)?,
        Algorithm::ColMajor => col_major_abt(backend, &le, &re)?,
        Algorithm::RowMajor => row_major_atb(backend, &le, &re)?,
        Algorithm::JinAbt | Algorithm::JinAtb => unreachable!("estimated only"),
    };
    let delta = backend.ledger().snapshot() - before;
    let want = if abt { lhs.dot(&rhs.t()) } else { lhs.t().dot(&rhs) };
    row.counts = delta.into();
    row.estimated_ms = delta.estimated_ms(&ctx.weights);
    row.rel_error = Some(rel_frobenius(&decode(backend, Some(key), &out)?, &want));
    Ok(row)
}
