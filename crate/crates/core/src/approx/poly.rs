//! Real polynomials in the monomial basis.

use super::coeffs::{COMP_F, COMP_G, EXP_UNIT_COEFFS};

/// A polynomial with a nominal approximation domain `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    /// Coefficients, lowest degree first.
    pub coeffs: Vec<f64>,
    pub domain: (f64, f64),
}

impl Poly {
    pub fn new(coeffs: Vec<f64>, domain: (f64, f64)) -> Self {
        Poly { coeffs, domain }
    }

    /// The comparison building block `f`, domain `[−1, 1]`.
    pub fn comp_f() -> Self {
        Poly::new(COMP_F.to_vec(), (-1.0, 1.0))
    }

    /// The comparison building block `g`, domain `[−1, 1]`.
    pub fn comp_g() -> Self {
        Poly::new(COMP_G.to_vec(), (-1.0, 1.0))
    }

    /// The degree-12 fit of `e^y` on `[−1, 1]`.
    pub fn exp_unit() -> Self {
        Poly::new(EXP_UNIT_COEFFS.to_vec(), (-1.0, 1.0))
    }

    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|&c| c != 0.0)
            .unwrap_or(0)
    }

    /// Horner evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Only odd powers have nonzero coefficients.
    pub fn is_odd(&self) -> bool {
        self.coeffs.iter().step_by(2).all(|&c| c == 0.0)
    }

    /// Only even powers have nonzero coefficients.
    pub fn is_even(&self) -> bool {
        self.coeffs.iter().skip(1).step_by(2).all(|&c| c == 0.0)
    }

    /// The polynomial times `t`.
    pub fn scaled(&self, t: f64) -> Self {
        Poly::new(self.coeffs.iter().map(|c| c * t).collect(), self.domain)
    }
}
