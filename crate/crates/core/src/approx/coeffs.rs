//! Precomputed polynomial coefficients. Regenerate with
//! `scripts/gen_exp_coeffs.py`.

/// Degree-12 least-squares fit of `e^y` on `[−1, 1]`, lowest degree first.
/// Maximum error on the interval is about `1.3e−13`.
pub(crate) const EXP_UNIT_COEFFS: [f64; 13] = [
    1.0000000000000009,
    0.9999999999996231,
    0.4999999999998954,
    0.16666666667796795,
    0.04166666666844368,
    0.00833333323733154,
    0.0013888888776409074,
    0.00019841304552712356,
    2.480162101653002e-05,
    2.7551254062640085e-06,
    2.755215700294609e-07,
    2.5557816602842825e-08,
    2.1266714400796085e-09,
];

/// `f(x) = (35x − 35x³ + 21x⁵ − 5x⁷) / 16`.
pub(crate) const COMP_F: [f64; 8] = [
    0.0,
    35.0 / 16.0,
    0.0,
    -35.0 / 16.0,
    0.0,
    21.0 / 16.0,
    0.0,
    -5.0 / 16.0,
];

/// `g(x) = (4589x − 16577x³ + 25614x⁵ − 12860x⁷) / 1024`.
pub(crate) const COMP_G: [f64; 8] = [
    0.0,
    4589.0 / 1024.0,
    0.0,
    -16577.0 / 1024.0,
    0.0,
    25614.0 / 1024.0,
    0.0,
    -12860.0 / 1024.0,
];
