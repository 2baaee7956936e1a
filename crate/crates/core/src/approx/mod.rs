//! Polynomial approximations and the row-wise softmax.
//!
//! Everything here is a low-degree polynomial evaluated slot-wise, so one
//! set of kernels serves both encrypted blocks and plain `f64` values (the
//! [`scalar`] mirror). The softmax of a row `x ∈ ℝ^c`:
//!
//! 1. an approximate maximum `m ≤ max(x)` from a comparison tournament;
//! 2. `x − m`, which leaves the exact softmax unchanged;
//! 3. the domain extension `D_n`, which maps `[−L^n·R, L^n·R]` into roughly
//!    `[−R, R]` while staying close to the identity near zero, plus an
//!    optional correction of its cubic shrinkage;
//! 4. `e^x` on `[−B, B]`, a row sum and a Goldschmidt inverse.

mod bound;
mod coeffs;
mod kernels;
mod montecarlo;
mod poly;
pub mod scalar;
mod softmax;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bound::{beta_at, theorem_beta, theorem_beta_above};
pub use montecarlo::{nested_radii, softmax_error, small_domain_error, ErrorStats, Variant};
pub use poly::Poly;
pub use softmax::{a_comp, a_exp, a_inv, a_max, a_softmax, domain_extend, precision_correction};

/// Softmax approximation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SoftmaxConfig {
    /// Radius of the core interval `[−R, R]`.
    pub r_orig: f64,
    /// Extension ratio `L > 1`.
    pub l: f64,
    /// Number of extension steps.
    pub n: u32,
    /// Apply the correction after the domain extension.
    pub precise: bool,
    /// `e^x` is approximated on `[−B, B]`; a power of two.
    pub exp_range: f64,
    /// The inverse converges on `(0, 2·R_inv)` and is accurate on `(0, R_inv]`.
    pub inv_range: f64,
    pub inv_iters: u32,
    /// Comparison polynomial chain, outermost first: `"fgg"` is `f∘g∘g`.
    pub comp_chain: String,
}

impl Default for SoftmaxConfig {
    fn default() -> Self {
        SoftmaxConfig {
            r_orig: 8.0,
            l: 2.0,
            n: 5,
            precise: true,
            exp_range: 8.0,
            inv_range: 100.0,
            inv_iters: 16,
            comp_chain: "fgg".into(),
        }
    }
}

impl SoftmaxConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ApproxConfig(m));
        if !(self.r_orig > 0.0 && self.r_orig.is_finite()) {
            return bad(format!("r_orig must be positive, got {}", self.r_orig));
        }
        if !(self.l > 1.0 && self.l.is_finite()) {
            return bad(format!("extension ratio must exceed 1, got {}", self.l));
        }
        let b = self.exp_range;
        if !(b >= 1.0 && b.fract() == 0.0 && (b as u64).is_power_of_two()) {
            return bad(format!("exp_range must be a power of two, got {b}"));
        }
        if !(self.inv_range > 0.0 && self.inv_range.is_finite()) {
            return bad(format!("inv_range must be positive, got {}", self.inv_range));
        }
        self.comp_chain_polys().map(|_| ())
    }

    /// `½·L^n·R`: inputs whose spread stays within twice this radius are
    /// handled (128 at the defaults).
    pub fn coverage(&self) -> f64 {
        0.5 * self.l.powi(self.n as i32) * self.r_orig
    }

    /// `⌈L^n·R⌉`; inputs are divided by this before the comparisons.
    pub fn r_max(&self) -> f64 {
        (self.l.powi(self.n as i32) * self.r_orig).ceil()
    }

    /// `K = (4/27)·L²(L^{2n} − 1) / (L^{2n}(L² − 1))`, the total cubic
    /// shrinkage of `D_n` near zero in units of `x³/R²`.
    pub fn correction_factor(&self) -> f64 {
        let l2 = self.l * self.l;
        let l2n = l2.powi(self.n as i32);
        4.0 / 27.0 * l2 * (l2n - 1.0) / (l2n * (l2 - 1.0))
    }

    pub(crate) fn comp_chain_polys(&self) -> Result<Vec<Poly>> {
        if self.comp_chain.is_empty() {
            return Err(Error::ApproxConfig("empty comparison chain".into()));
        }
        self.comp_chain
            .chars()
            .map(|ch| match ch {
                'f' => Ok(Poly::comp_f()),
                'g' => Ok(Poly::comp_g()),
                _ => Err(Error::ApproxConfig(format!(
                    "comparison chain may only contain 'f' and 'g', got {:?}",
                    self.comp_chain
                ))),
            })
            .collect()
    }

    /// Levels consumed by one comparison.
    pub fn comp_depth(&self) -> u32 {
        kernels::ODD7_DEPTH * self.comp_chain.len() as u32
    }
}
