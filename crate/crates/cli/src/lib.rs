//! Library half of the `cipherfit` command: configuration, CSV files and the
//! `train` / benchmark drivers.

pub mod bench;
pub mod config;
pub mod csvio;
pub mod train;
