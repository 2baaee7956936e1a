//! Closed-form operation counts.
//!
//! With `A = ⌈a/s0⌉`, `B = ⌈b/s1⌉`, `c' = 2^⌈log2 c⌉` and `h = c'/2`, the
//! executed algorithms cost:
//!
//! | algorithm        | CMult                  | Mult    | Rot                                  |
//! |------------------|------------------------|---------|--------------------------------------|
//! | DiagABT          | `c'A`                  | `hAB`   | `h(B + 2A log s1)`                   |
//! | DiagATB (RL)     | `h(A + B)`             | `hAB`   | `h(2A + B log s0)`                   |
//! | DiagATB (PRU)    | `A + (h−1)AB + hB`     | `hAB`   | `2A + (h−1)(A + AB) + hB log s0`     |
//! | ColMajor/RowMajor| `c(A + B)`             | `cAB`   | `c(B log s0 + A(log s1 + 1)) − A`    |
//!
//! The two Jin et al. packings are never executed; their counts are the
//! published estimates `Mult = bc` and, for `AᵀB`, `Rot = bc·log s`.

use serde::{Deserialize, Serialize};

use crate::emulator::OpCounts;

/// Algorithms with a count formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    DiagAbt,
    DiagAtbRl,
    DiagAtbPru,
    ColMajor,
    RowMajor,
    JinAbt,
    JinAtb,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::JinAbt,
        Algorithm::ColMajor,
        Algorithm::DiagAbt,
        Algorithm::JinAtb,
        Algorithm::RowMajor,
        Algorithm::DiagAtbRl,
        Algorithm::DiagAtbPru,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::DiagAbt => "diag-abt",
            Algorithm::DiagAtbRl => "diag-atb-rl",
            Algorithm::DiagAtbPru => "diag-atb-pru",
            Algorithm::ColMajor => "col-major",
            Algorithm::RowMajor => "row-major",
            Algorithm::JinAbt => "jin-abt",
            Algorithm::JinAtb => "jin-atb",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }

    /// Whether the algorithm can be run on the emulator.
    pub fn executable(self) -> bool {
        !matches!(self, Algorithm::JinAbt | Algorithm::JinAtb)
    }
}

/// The three counts reported for matrix products.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatmulCounts {
    pub cmult: u64,
    pub mult: u64,
    pub rot: u64,
}

impl From<OpCounts> for MatmulCounts {
    fn from(c: OpCounts) -> Self {
        MatmulCounts {
            cmult: c.cmult,
            mult: c.mult,
            rot: c.rot,
        }
    }
}

fn log2(n: usize) -> u64 {
    n.trailing_zeros() as u64
}

/// Operation counts of `alg` for the shape `(a, b, c)` on `s0 × s1` units.
pub fn count_formula(alg: Algorithm, a: usize, b: usize, c: usize, s0: usize, s1: usize) -> MatmulCounts {
    let ab = a.div_ceil(s0) as u64;
    let bb = b.div_ceil(s1) as u64;
    let cp = c.next_power_of_two() as u64;
    let h = cp / 2;
    let (ls0, ls1) = (log2(s0), log2(s1));
    let c = c as u64;
    let b = b as u64;
    match alg {
        Algorithm::DiagAbt if cp == 1 => MatmulCounts {
            cmult: ab,
            mult: ab * bb,
            rot: 2 * ab * ls1,
        },
        Algorithm::DiagAbt => MatmulCounts {
            cmult: cp * ab,
            mult: h * ab * bb,
            rot: h * (bb + 2 * ab * ls1),
        },
        Algorithm::DiagAtbRl | Algorithm::DiagAtbPru if cp == 1 => MatmulCounts {
            cmult: bb,
            mult: ab * bb,
            rot: bb * ls0,
        },
        Algorithm::DiagAtbRl => MatmulCounts {
            cmult: h * (ab + bb),
            mult: h * ab * bb,
            rot: h * (2 * ab + bb * ls0),
        },
        Algorithm::DiagAtbPru => MatmulCounts {
            cmult: ab + (h - 1) * ab * bb + h * bb,
            mult: h * ab * bb,
            rot: 2 * ab + (h - 1) * (ab + ab * bb) + h * bb * ls0,
        },
        Algorithm::ColMajor | Algorithm::RowMajor => MatmulCounts {
            cmult: c * (ab + bb),
            mult: c * ab * bb,
            rot: c * (bb * ls0 + ab * (ls1 + 1)) - ab,
        },
        Algorithm::JinAbt => MatmulCounts {
            cmult: 0,
            mult: b * c,
            rot: 0,
        },
        Algorithm::JinAtb => MatmulCounts {
            cmult: 0,
            mult: b * c,
            rot: b * c * log2(s0 * s1),
        },
    }
}
