//! Encrypted transfer learning of a linear classification head.
//!
//! The crate is layered bottom-up:
//!
//! - [`emulator`]: a noise-free leveled SIMD ciphertext emulator with exact
//!   operation and depth accounting, behind the [`emulator::Backend`] trait;
//! - [`encoding`]: block encoding of matrices, tiling, masks and the
//!   structural primitives RU, RL, PRU, CS and RS;
//! - [`matmul`]: the diagonal-packing products `tABᵀ` and `tAᵀB`, two
//!   baselines, and closed-form operation counts;
//! - [`approx`]: polynomial comparison, max, exponential, inverse, domain
//!   extension and the row-wise softmax built from them;
//! - [`training`]: the client/server fine-tuning protocol with Nesterov
//!   momentum and validation-based early stopping;
//! - [`data`]: labelled feature sets and a seeded Gaussian-mixture generator.

pub mod approx;
pub mod data;
pub mod emulator;
pub mod encoding;
pub mod error;
pub mod matmul;
pub mod training;

pub use error::{Error, Result};
