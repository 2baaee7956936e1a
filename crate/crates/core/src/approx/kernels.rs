//! Slot-wise approximation kernels, written once over [`Arith`] so the
//! encrypted pipeline and its scalar mirror perform identical arithmetic.

use num_complex::Complex64;

use super::coeffs::EXP_UNIT_COEFFS;
use super::poly::Poly;
use super::SoftmaxConfig;
use crate::emulator::Backend;
use crate::error::Result;

/// Element-wise arithmetic on some value type.
pub(crate) trait Arith {
    type V: Clone;
    fn add(&self, x: &Self::V, y: &Self::V) -> Result<Self::V>;
    fn sub(&self, x: &Self::V, y: &Self::V) -> Result<Self::V>;
    fn mul(&self, x: &Self::V, y: &Self::V) -> Result<Self::V>;
    fn scale(&self, x: &Self::V, t: f64) -> Result<Self::V>;
    fn add_const(&self, x: &Self::V, t: f64) -> Self::V;
    /// Makes room for `depth` further multiplicative levels.
    fn ensure(&self, x: &Self::V, depth: u32) -> Result<Self::V>;
}

pub(crate) struct Scalar;

impl Arith for Scalar {
    type V = f64;
    fn add(&self, x: &f64, y: &f64) -> Result<f64> {
        Ok(x + y)
    }
    fn sub(&self, x: &f64, y: &f64) -> Result<f64> {
        Ok(x - y)
    }
    fn mul(&self, x: &f64, y: &f64) -> Result<f64> {
        Ok(x * y)
    }
    fn scale(&self, x: &f64, t: f64) -> Result<f64> {
        Ok(x * t)
    }
    fn add_const(&self, x: &f64, t: f64) -> f64 {
        x + t
    }
    fn ensure(&self, x: &f64, _: u32) -> Result<f64> {
        Ok(*x)
    }
}

pub(crate) struct Cipher<'a, B>(pub &'a B);

impl<B: Backend> Arith for Cipher<'_, B> {
    type V = B::Block;
    fn add(&self, x: &B::Block, y: &B::Block) -> Result<B::Block> {
        self.0.add(x, y)
    }
    fn sub(&self, x: &B::Block, y: &B::Block) -> Result<B::Block> {
        self.0.sub(x, y)
    }
    fn mul(&self, x: &B::Block, y: &B::Block) -> Result<B::Block> {
        self.0.mult(x, y)
    }
    fn scale(&self, x: &B::Block, t: f64) -> Result<B::Block> {
        self.0.cmult_scalar(x, Complex64::new(t, 0.0))
    }
    fn add_const(&self, x: &B::Block, t: f64) -> B::Block {
        self.0.add_scalar(x, Complex64::new(t, 0.0))
    }
    fn ensure(&self, x: &B::Block, depth: u32) -> Result<B::Block> {
        self.0.ensure_level(x, depth)
    }
}

/// Depth of [`odd7`].
pub(crate) const ODD7_DEPTH: u32 = 3;

/// `c1·x + c3·x³ + c5·x⁵ + c7·x⁷` in depth 3 with 5 Mult and 4 CMult:
/// `(c1·x + (c3·x)·x²) + (c5·x + (c7·x)·x²)·x⁴`.
pub(crate) fn odd7<A: Arith>(ar: &A, x: &A::V, p: &Poly) -> Result<A::V> {
    debug_assert!(p.is_odd() && p.degree() <= 7);
    let c = |k: usize| p.coeffs.get(k).copied().unwrap_or(0.0);
    let x = ar.ensure(x, ODD7_DEPTH)?;
    let x2 = ar.mul(&x, &x)?;
    let lo = ar.add(&ar.scale(&x, c(1))?, &ar.mul(&ar.scale(&x, c(3))?, &x2)?)?;
    let hi = ar.add(&ar.scale(&x, c(5))?, &ar.mul(&ar.scale(&x, c(7))?, &x2)?)?;
    let x4 = ar.mul(&x2, &x2)?;
    ar.add(&lo, &ar.mul(&hi, &x4)?)
}

/// `(h(d) + 1) / 2` for the comparison chain `h`, applied right to left.
/// The outermost polynomial is pre-halved so the step costs nothing extra.
pub(crate) fn comp<A: Arith>(ar: &A, d: &A::V, cfg: &SoftmaxConfig) -> Result<A::V> {
    let chain = cfg.comp_chain_polys()?;
    let last = chain.len() - 1;
    let mut z = d.clone();
    for (i, p) in chain.iter().rev().enumerate() {
        z = if i == last {
            odd7(ar, &z, &p.scaled(0.5))?
        } else {
            odd7(ar, &z, p)?
        };
    }
    Ok(ar.add_const(&z, 0.5))
}

/// `b + (a − b)·Acomp(a, b)`: a convex combination that stays between the
/// two inputs.
pub(crate) fn amax2<A: Arith>(ar: &A, a: &A::V, b: &A::V, cfg: &SoftmaxConfig) -> Result<A::V> {
    let d = ar.sub(a, b)?;
    let w = comp(ar, &d, cfg)?;
    ar.add(b, &ar.mul(&d, &w)?)
}

/// `D_n`: for `i = n−1 … 0`, `x ← x − k_i·x³` with
/// `k_i = 4 / (27·R²·L^{2i})`. Two levels per step.
pub(crate) fn domain_extend<A: Arith>(ar: &A, x: &A::V, cfg: &SoftmaxConfig) -> Result<A::V> {
    let mut x = x.clone();
    for i in (0..cfg.n).rev() {
        let k = 4.0 / (27.0 * cfg.r_orig * cfg.r_orig * cfg.l.powi(2 * i as i32));
        x = ar.ensure(&x, 2)?;
        let x2 = ar.mul(&x, &x)?;
        let t = ar.mul(&ar.scale(&x, k)?, &x2)?;
        x = ar.sub(&x, &t)?;
    }
    Ok(x)
}

/// Correction applied after `D_n`: `x + K·(x³/R² − x⁵/R⁴)`, undoing the
/// leading cubic shrinkage of the extension on the core interval.
pub(crate) fn precision_correction<A: Arith>(ar: &A, x: &A::V, cfg: &SoftmaxConfig) -> Result<A::V> {
    let k = cfg.correction_factor();
    let r2 = cfg.r_orig * cfg.r_orig;
    let x = ar.ensure(x, 3)?;
    let x2 = ar.mul(&x, &x)?;
    let t3 = ar.mul(&ar.scale(&x, k / r2)?, &x2)?;
    let x4 = ar.mul(&x2, &x2)?;
    let t5 = ar.mul(&ar.scale(&x, k / (r2 * r2))?, &x4)?;
    ar.sub(&ar.add(&x, &t3)?, &t5)
}

/// Depth of [`exp`] before the final squarings.
const EXP_POLY_DEPTH: u32 = 5;

/// `p(x/B)^B`, with `p` the degree-12 fit of `e^y` and `B` a power of two.
/// Powers come from a product tree (`x^k` at depth `⌈log2 k⌉`); the `1/B`
/// scaling is folded into the coefficients.
pub(crate) fn exp<A: Arith>(ar: &A, x: &A::V, b: f64) -> Result<A::V> {
    let x = ar.ensure(x, EXP_POLY_DEPTH)?;
    let deg = EXP_UNIT_COEFFS.len() - 1;
    let mut pw: Vec<A::V> = vec![x.clone(), x];
    for k in 2..=deg {
        let hi = if k.is_power_of_two() { k / 2 } else { 1 << k.ilog2() };
        let v = ar.mul(&pw[hi], &pw[k - hi])?;
        pw.push(v);
    }
    let mut acc: Option<A::V> = None;
    for (k, &c) in EXP_UNIT_COEFFS.iter().enumerate().skip(1) {
        let term = ar.scale(&pw[k], c / b.powi(k as i32))?;
        acc = Some(match acc {
            None => term,
            Some(a) => ar.add(&a, &term)?,
        });
    }
    let mut y = ar.add_const(&acc.expect("degree ≥ 1"), EXP_UNIT_COEFFS[0]);
    for _ in 0..(b as u64).trailing_zeros() {
        y = ar.ensure(&y, 1)?;
        y = ar.mul(&y, &y)?;
    }
    Ok(y)
}

/// Goldschmidt inverse for `x ∈ (0, R)`: with `y = x/R`, `b = 1 − y` and
/// `a = 2 − y`, iterate `b ← b²`, `a ← a·(1 + b)`; returns `a/R`.
/// Diverges outside `(0, 2R)`.
pub(crate) fn inv<A: Arith>(ar: &A, x: &A::V, r: f64, iters: u32) -> Result<A::V> {
    let x = ar.ensure(x, 1)?;
    let mut b = ar.add_const(&ar.scale(&x, -1.0 / r)?, 1.0);
    let mut a = ar.add_const(&b, 1.0);
    for _ in 0..iters {
        b = ar.ensure(&b, 2)?;
        a = ar.ensure(&a, 1)?;
        b = ar.mul(&b, &b)?;
        a = ar.mul(&a, &ar.add_const(&b, 1.0))?;
    }
    let a = ar.ensure(&a, 1)?;
    ar.scale(&a, 1.0 / r)
}
