//! Plain `f64` versions of the approximations.
//!
//! These run the same kernels as the encrypted pipeline, in the same order,
//! so a row pushed through [`softmax_row`] matches the decrypted output of
//! [`a_softmax`](super::a_softmax) up to rounding in the row sum.

use super::kernels::{self, Scalar};
use super::SoftmaxConfig;

fn ok(r: crate::Result<f64>) -> f64 {
    r.expect("scalar arithmetic is infallible")
}

/// Approximate `e^x`, accurate on `[−B, B]`.
pub fn a_exp(x: f64, b: f64) -> f64 {
    ok(kernels::exp(&Scalar, &x, b))
}

/// Approximate `1/x` for `x ∈ (0, R]`.
pub fn a_inv(x: f64, r: f64, iters: u32) -> f64 {
    ok(kernels::inv(&Scalar, &x, r, iters))
}

/// Approximate `[a > b]` for `a, b ∈ [−½, ½]`.
pub fn a_comp(a: f64, b: f64, cfg: &SoftmaxConfig) -> f64 {
    ok(kernels::comp(&Scalar, &(a - b), cfg))
}

/// Approximate `max(a, b)` for `a, b ∈ [−½, ½]`; never exceeds the larger
/// input as long as the comparison stays in `[0, 1]`.
pub fn a_max2(a: f64, b: f64, cfg: &SoftmaxConfig) -> f64 {
    ok(kernels::amax2(&Scalar, &a, &b, cfg))
}

pub fn domain_extend(x: f64, cfg: &SoftmaxConfig) -> f64 {
    ok(kernels::domain_extend(&Scalar, &x, cfg))
}

pub fn precision_correction(x: f64, cfg: &SoftmaxConfig) -> f64 {
    ok(kernels::precision_correction(&Scalar, &x, cfg))
}

/// Approximate maximum of a row, via the same padded tournament as the
/// encrypted version.
pub fn a_max(row: &[f64], cfg: &SoftmaxConfig) -> f64 {
    let c = row.len().max(1);
    let cp = c.next_power_of_two();
    let r_max = cfg.r_max();
    let mut v = vec![-0.5; cp];
    for (vi, &x) in v.iter_mut().zip(row) {
        *vi = x * (1.0 / r_max);
    }
    let mut step = 1;
    while step < cp {
        for i in (0..cp).step_by(2 * step) {
            v[i] = a_max2(v[i], v[i + step], cfg);
        }
        step *= 2;
    }
    v[0] * r_max
}

/// The approximate softmax of one row.
pub fn softmax_row(row: &[f64], cfg: &SoftmaxConfig) -> Vec<f64> {
    let m = a_max(row, cfg);
    let e: Vec<f64> = row
        .iter()
        .map(|&x| {
            let mut y = domain_extend(x - m, cfg);
            if cfg.precise {
                y = precision_correction(y, cfg);
            }
            a_exp(y, cfg.exp_range)
        })
        .collect();
    let z = a_inv(e.iter().sum(), cfg.inv_range, cfg.inv_iters);
    e.iter().map(|v| v * z).collect()
}

/// The exact softmax, computed stably.
pub fn softmax_exact(row: &[f64]) -> Vec<f64> {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_endpoints() {
        assert!((a_exp(0.0, 8.0) - 1.0).abs() < 1e-3);
        let ratio = a_exp(-8.0, 8.0) / a_exp(0.0, 8.0);
        assert!((ratio / (-8.0f64).exp() - 1.0).abs() < 0.05);
    }

    #[test]
    fn inv_endpoints() {
        assert!((a_inv(1.0, 100.0, 16) - 1.0).abs() < 1e-3);
        assert!((a_inv(100.0, 100.0, 16) * 100.0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn comparison_is_half_on_ties() {
        let cfg = SoftmaxConfig::default();
        assert_eq!(a_comp(0.3, 0.3, &cfg), 0.5);
        let v = a_comp(0.4, -0.4, &cfg);
        assert!((0.99..=1.0).contains(&v), "{v}");
    }

    #[test]
    fn equal_row_max_is_exact() {
        let cfg = SoftmaxConfig::default();
        assert_eq!(a_max(&[5.0; 4], &cfg), 5.0);
    }

    #[test]
    fn uniform_row() {
        let cfg = SoftmaxConfig::default();
        for c in [2, 3, 5, 10, 16] {
            for p in softmax_row(&vec![0.0; c], &cfg) {
                assert!((p - 1.0 / c as f64).abs() < 0.005);
            }
        }
    }

    #[test]
    fn motivating_example() {
        let cfg = SoftmaxConfig::default();
        let x = [8.0, 10.0, 13.0];
        let exact = softmax_exact(&x);
        for (p, q) in softmax_row(&x, &cfg).iter().zip(&exact) {
            assert!((p - q).abs() < 0.01, "{p} vs {q}");
        }
        assert!((exact[0] - 0.006).abs() < 5e-4 && (exact[2] - 0.946).abs() < 5e-4);
    }
}
