//! Seeded Monte Carlo error estimates, sharded across threads.
//!
//! Samples are split into fixed shards, each with its own ChaCha8 stream
//! seeded from `(seed, shard)`, so results do not depend on thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scalar::{a_exp, a_inv, a_max, domain_extend, precision_correction, softmax_exact, softmax_row};
use super::SoftmaxConfig;

const SHARD: usize = 8192;

/// Max and mean of the per-row ∞-norm error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub max: f64,
    pub mean: f64,
    pub samples: usize,
}

/// Radii in `{4, 8, 32, 128}` up to `r`, the sampling scheme of the error
/// tables: a radius-`r` cell spends an equal share of samples on each.
pub fn nested_radii(r: f64) -> Vec<f64> {
    let v: Vec<f64> = [4.0, 8.0, 32.0, 128.0].into_iter().filter(|&x| x <= r).collect();
    if v.is_empty() { vec![r] } else { v }
}

/// The three configurations compared in the error tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Max subtraction only, no domain extension.
    Norm,
    /// Plus the domain extension.
    NormExtn,
    /// Plus the precision correction.
    NormExtnPrec,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Norm, Variant::NormExtn, Variant::NormExtnPrec];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Norm => "norm",
            Variant::NormExtn => "norm+extn",
            Variant::NormExtnPrec => "norm+extn+prec",
        }
    }

    /// `base` with the extension and correction switched accordingly.
    pub fn config(self, base: &SoftmaxConfig) -> SoftmaxConfig {
        match self {
            Variant::Norm => SoftmaxConfig { n: 0, precise: false, ..base.clone() },
            Variant::NormExtn => SoftmaxConfig { precise: false, ..base.clone() },
            Variant::NormExtnPrec => SoftmaxConfig { precise: true, ..base.clone() },
        }
    }

    /// Whether the variant is meant to handle inputs in `[−r, r]^c`.
    pub fn covers(self, base: &SoftmaxConfig, r: f64) -> bool {
        r <= self.config(base).coverage()
    }
}

fn sharded(samples: usize, seed: u64, row_error: impl Fn(&mut ChaCha8Rng, usize) -> f64 + Sync) -> ErrorStats {
    let shards = samples.div_ceil(SHARD);
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(shards.max(1));
    let mut parts = vec![(0.0f64, 0.0f64); shards];
    std::thread::scope(|s| {
        for (t, chunk) in parts.chunks_mut(shards.div_ceil(threads).max(1)).enumerate() {
            let row_error = &row_error;
            let first = t * shards.div_ceil(threads).max(1);
            s.spawn(move || {
                for (k, out) in chunk.iter_mut().enumerate() {
                    let shard = first + k;
                    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (shard as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                    let (lo, hi) = (shard * SHARD, ((shard + 1) * SHARD).min(samples));
                    let (mut mx, mut sum) = (0.0f64, 0.0);
                    for i in lo..hi {
                        // A diverged row must not vanish from the max.
                        let e = match row_error(&mut rng, i) {
                            e if e.is_nan() => f64::INFINITY,
                            e => e,
                        };
                        mx = mx.max(e);
                        sum += e;
                    }
                    *out = (mx, sum);
                }
            });
        }
    });
    let max = parts.iter().map(|p| p.0).fold(0.0, f64::max);
    let sum: f64 = parts.iter().map(|p| p.1).sum();
    ErrorStats { max, mean: sum / samples.max(1) as f64, samples }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Error of the approximate softmax against the exact one for rows drawn
/// uniformly from `[−r, r]^c`, samples split evenly over `radii`.
pub fn softmax_error(cfg: &SoftmaxConfig, c: usize, radii: &[f64], samples: usize, seed: u64) -> ErrorStats {
    let per = samples.div_ceil(radii.len().max(1));
    sharded(samples, seed, |rng, i| {
        let r = radii[(i / per).min(radii.len() - 1)];
        let x: Vec<f64> = (0..c).map(|_| rng.random_range(-r..=r)).collect();
        max_abs_diff(&softmax_row(&x, cfg), &softmax_exact(&x))
    })
}

/// Error of the exp/sum/inverse part alone: the `ε` of the error bound.
///
/// The bound only ever applies that part to normalized, domain-extended
/// rows `D_n(x − Amax(x))`, which lie in `[−R, R]^c` with their maximum
/// close to zero. Those rows are generated here from `x` uniform in
/// `[−r, r]^c` and compared against the exact softmax of `D_n(x − Amax(x))`.
/// Arbitrary points of `[−R, R]^c` are not used: rows with several entries
/// near `R` push the exponential sum far outside the inverse's range.
pub fn small_domain_error(cfg: &SoftmaxConfig, c: usize, r: f64, samples: usize, seed: u64) -> ErrorStats {
    sharded(samples, seed, |rng, _| {
        let x: Vec<f64> = (0..c).map(|_| rng.random_range(-r..=r)).collect();
        let m = a_max(&x, cfg);
        let w: Vec<f64> = x.iter().map(|&v| domain_extend(v - m, cfg)).collect();
        let e: Vec<f64> = w
            .iter()
            .map(|&v| a_exp(if cfg.precise { precision_correction(v, cfg) } else { v }, cfg.exp_range))
            .collect();
        let z = a_inv(e.iter().sum(), cfg.inv_range, cfg.inv_iters);
        let p: Vec<f64> = e.iter().map(|v| v * z).collect();
        max_abs_diff(&p, &softmax_exact(&w))
    })
}
