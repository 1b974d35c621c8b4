//! Multi-fidelity randomized prior network (MF-RPN) ensembles.
//!
//! The crate is organized bottom-up:
//!
//! - [`nnet`]: dense networks, exact backpropagation, Adam with exponential decay.
//! - [`rpn`]: randomized prior members (trainable net + frozen prior), bootstrapped
//!   ensembles and their predictive mean / spread.
//! - [`mf`]: two-stage members chaining a low-fidelity head into a high-fidelity
//!   head, trained jointly on both fidelities.
//! - [`data`]: gridded datasets, Z-score statistics, the on-disk format and
//!   synthetic low/high-fidelity generators.
//! - [`metrics`]: MAE, R², fair CRPS, grouped aggregation and uncertainty diagnostics.
//! - [`config`] and [`cli`]: run configuration profiles and the `mfrpn` command line.

pub mod cli;
pub mod config;
pub mod data;
mod error;
pub mod io_util;
pub mod matrix;
pub mod metrics;
pub mod mf;
pub mod nnet;
pub mod rpn;
pub mod seed;

pub use error::{Error, ErrorKind, Result};
pub use matrix::Matrix;
