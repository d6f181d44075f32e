//! Simulation and data-driven surrogate modelling of directly-modulated lasers.
//!
//! The crate is organised bottom-up:
//!
//! - [`ode`] and [`laser`]: rate-equation ground truth,
//! - [`signal`]: randomised 4PAM drive waveforms and datasets,
//! - [`autodiff`]: a small reverse-mode differentiation engine,
//! - [`models`]: Volterra, TDNN, LSTM and convolutional-attention surrogates,
//! - [`train`]: training, metrics, sweeps, timing and eye diagrams,
//!
//! The `dml` binary wraps these as command-line subcommands.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod config;
pub mod error;
pub mod laser;
pub mod models;
pub mod ode;
pub mod signal;
pub mod train;

pub use error::{Error, Result};
