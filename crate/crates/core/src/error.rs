//! Error type shared by every module.
//!
//! Each variant belongs to exactly one module; [`Error::module`] and
//! [`Error::code`] give a stable, machine-readable tag for front ends.

use thiserror::Error;

/// Module that raised an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Module {
    Emulator,
    Encoding,
    Matmul,
    Approx,
    Training,
    Io,
}

impl Module {
    pub fn as_str(self) -> &'static str {
        match self {
            Module::Emulator => "he-emulator",
            Module::Encoding => "encoding",
            Module::Matmul => "matmul",
            Module::Approx => "approx",
            Module::Training => "training",
            Module::Io => "io",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("depth exhausted: operation needs level {need}, operand has {have}")]
    DepthExhausted { need: u32, have: u32 },

    #[error("context mismatch: {0}")]
    ContextMismatch(String),

    #[error("invalid context: {0}")]
    InvalidContext(String),

    #[error("residual imaginary part {magnitude:e} at slot {slot}")]
    ResidualImaginary { slot: usize, magnitude: f64 },

    #[error("encoding: {0}")]
    Encoding(String),

    #[error("shape: {0}")]
    Shape(String),

    #[error("approximation config: {0}")]
    ApproxConfig(String),

    #[error("protocol: {0}")]
    Protocol(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse: {0}")]
    Parse(String),
}

impl Error {
    pub fn module(&self) -> Module {
        match self {
            Error::DepthExhausted { .. } | Error::ContextMismatch(_) | Error::InvalidContext(_) => {
                Module::Emulator
            }
            Error::ResidualImaginary { .. } | Error::Encoding(_) => Module::Encoding,
            Error::Shape(_) => Module::Matmul,
            Error::ApproxConfig(_) => Module::Approx,
            Error::Protocol(_) => Module::Training,
            Error::Io(_) | Error::Parse(_) => Module::Io,
        }
    }

    /// Stable identifier of the form `module/kind`.
    pub fn code(&self) -> String {
        let kind = match self {
            Error::DepthExhausted { .. } => "depth-exhausted",
            Error::ContextMismatch(_) => "context-mismatch",
            Error::InvalidContext(_) => "invalid-context",
            Error::ResidualImaginary { .. } => "residual-imaginary",
            Error::Encoding(_) => "invalid-encoding",
            Error::Shape(_) => "shape",
            Error::ApproxConfig(_) => "invalid-config",
            Error::Protocol(_) => "protocol",
            Error::Io(_) => "io",
            Error::Parse(_) => "parse",
        };
        format!("{}/{}", self.module().as_str(), kind)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
