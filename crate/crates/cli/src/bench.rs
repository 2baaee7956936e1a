//! `bench-matmul` and `bench-softmax`.

use cipherfit::approx::{nested_radii, softmax_error, SoftmaxConfig, Variant};
use cipherfit::emulator::{Context, Emulator};
use cipherfit::matmul::{bench_context, run_product, Algorithm, BenchRow, BENCH_SLOTS};
use cipherfit::{Error, Result};
use serde::{Deserialize, Serialize};

/// The shapes of the matrix-product comparison.
pub const REFERENCE_SHAPES: [(usize, usize, usize); 5] =
    [(128, 128, 4), (256, 256, 8), (512, 769, 4), (1024, 769, 8), (2048, 769, 16)];

/// Parses `a,b,c;a,b,c;…`.
pub fn parse_shapes(s: &str) -> Result<Vec<(usize, usize, usize)>> {
    s.split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let v: Vec<usize> = t
                .split(',')
                .map(|x| x.trim().parse().map_err(|_| Error::Parse(format!("bad shape {t:?}"))))
                .collect::<Result<_>>()?;
            match v[..] {
                [a, b, c] if a > 0 && b > 0 && c > 0 => Ok((a, b, c)),
                _ => Err(Error::Parse(format!("shape {t:?} must be three positive integers a,b,c"))),
            }
        })
        .collect()
}

pub fn parse_algorithms(s: &str) -> Result<Vec<Algorithm>> {
    s.split(',')
        .map(|t| {
            Algorithm::parse(t.trim()).ok_or_else(|| {
                let known: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                Error::Parse(format!("unknown algorithm {t:?}; expected one of {}", known.join(", ")))
            })
        })
        .collect()
}

/// Runs every algorithm on every shape, each in a fresh `s0 = a` context
/// (`s0` overridable) over [`BENCH_SLOTS`] slots.
pub fn matmul(shapes: &[(usize, usize, usize)], algs: &[Algorithm], s0: Option<usize>, seed: u64) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &shape in shapes {
        let ctx = match s0 {
            Some(s0) => Context::with_slots(BENCH_SLOTS, s0, Context::DEFAULT_MAX_LEVEL)?,
            None => bench_context(shape.0)?,
        };
        for &alg in algs {
            let (he, key) = Emulator::new(ctx.clone())?;
            rows.push(run_product(&he, &key, alg, shape, seed)?);
        }
    }
    Ok(rows)
}

pub fn matmul_table(rows: &[BenchRow]) -> String {
    let mut out = format!(
        "{:<14} {:>18} {:>6} {:>6} {:>7} {:>7} {:>8} {:>11} {:>10}\n",
        "algorithm", "(a, b, c)", "s0", "s1", "CMult", "Mult", "Rot", "est. ms", "rel. err"
    );
    for r in rows {
        let err = r.rel_error.map_or("estimate".to_string(), |e| format!("{e:.1e}"));
        out += &format!(
            "{:<14} {:>18} {:>6} {:>6} {:>7} {:>7} {:>8} {:>11.1} {:>10}\n",
            r.algorithm.name(),
            format!("({}, {}, {})", r.a, r.b, r.c),
            r.s0,
            r.s1,
            r.counts.cmult,
            r.counts.mult,
            r.counts.rot,
            r.estimated_ms,
            err
        );
    }
    out
}

/// One cell of the softmax error table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxCell {
    pub classes: usize,
    pub radius: f64,
    pub variant: Variant,
    pub max_error: f64,
    pub mean_error: f64,
    pub samples: usize,
}

pub const MIN_SAMPLES: usize = 100_000;

/// Max and mean error for every class count and every radius of
/// `{4, 8, 32, 128}` up to `range`, sampling each cell's nested radii
/// evenly. Variants are skipped on radii they do not cover.
pub fn softmax(base: &SoftmaxConfig, classes: &[usize], samples: usize, range: f64, seed: u64) -> Result<Vec<SoftmaxCell>> {
    base.validate()?;
    if samples < MIN_SAMPLES {
        return Err(Error::ApproxConfig(format!("need at least {MIN_SAMPLES} samples, got {samples}")));
    }
    if range.is_nan() || range <= 0.0 {
        return Err(Error::ApproxConfig(format!("range must be positive, got {range}")));
    }
    let mut cells = Vec::new();
    for &c in classes {
        if c == 0 {
            return Err(Error::ApproxConfig("class count must be positive".into()));
        }
        for r in nested_radii(range) {
            let radii = nested_radii(r);
            for v in Variant::ALL.into_iter().filter(|v| v.covers(base, r)) {
                let stats = softmax_error(&v.config(base), c, &radii, samples, seed);
                cells.push(SoftmaxCell {
                    classes: c,
                    radius: r,
                    variant: v,
                    max_error: stats.max,
                    mean_error: stats.mean,
                    samples,
                });
            }
        }
    }
    Ok(cells)
}

pub fn softmax_table(cells: &[SoftmaxCell]) -> String {
    let mut out = format!("{:>3} {:>5}  {:<15} {:>10} {:>10}\n", "c", "R", "variant", "max", "avg");
    for x in cells {
        out += &format!(
            "{:>3} {:>5}  {:<15} {:>10.2e} {:>10.2e}\n",
            x.classes,
            x.radius,
            x.variant.name(),
            x.max_error,
            x.mean_error
        );
    }
    out
}
