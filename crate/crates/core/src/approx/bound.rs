//! Worst-case error bound of the domain-extended softmax.
//!
//! If the approximate maximum `m` satisfies `max(x) − r ≤ m ≤ max(x)`, the
//! softmax error on `[−L^n·R, L^n·R]^c` is at most `β(r) + ε`, where `ε` is
//! the error of the exp/sum/inverse part on the core interval and
//!
//! `β(r) = 1/(1 + e^r/(c−1)) + 1/(1 + e^{r − δL²r³/(L²−1)}/(c−1)) + δr³L²/(2(L²−1))`
//!
//! with `δ = 4/(27R²)`. The bound does not depend on `n`.

use super::SoftmaxConfig;

const GRID: usize = 20_000;

/// `β(r)` for `c` classes.
pub fn beta_at(cfg: &SoftmaxConfig, c: usize, r: f64) -> f64 {
    let delta = 4.0 / (27.0 * cfg.r_orig * cfg.r_orig);
    let l2 = cfg.l * cfg.l;
    let shrink = delta * l2 * r.powi(3) / (l2 - 1.0);
    let others = (c as f64 - 1.0).max(0.0);
    let tail = |t: f64| if others == 0.0 { 0.0 } else { 1.0 / (1.0 + t.exp() / others) };
    tail(r) + tail(r - shrink) + shrink / 2.0
}

/// `min β(r)` over `r ∈ [lo, hi]` on a uniform grid.
fn min_beta(cfg: &SoftmaxConfig, c: usize, lo: f64, hi: f64) -> f64 {
    (0..=GRID)
        .map(|i| beta_at(cfg, c, lo + (hi - lo) * i as f64 / GRID as f64))
        .fold(f64::INFINITY, f64::min)
}

/// The tightest bound over `r ∈ (0, R]`.
pub fn theorem_beta(cfg: &SoftmaxConfig, c: usize) -> f64 {
    min_beta(cfg, c, cfg.r_orig / GRID as f64, cfg.r_orig)
}

/// The tightest bound over `r ≥ r_min`, for a maximum known to be within
/// `r_min` of the true one.
pub fn theorem_beta_above(cfg: &SoftmaxConfig, c: usize, r_min: f64) -> f64 {
    let lo = r_min.max(cfg.r_orig / GRID as f64);
    min_beta(cfg, c, lo, lo.max(cfg.r_orig))
}
