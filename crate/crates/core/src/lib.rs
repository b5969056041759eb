//! Seasonal epidemic forecasting under expert behavioral constraints.
//!
//! A candidate model is trained on one partition of the training seasons
//! with a loss that switches to a bound penalty whenever the constraint is
//! predicted to fail; a held-out partition then either certifies the
//! constraint with a one-sided Student-t confidence bound or the run returns
//! "No Solution Found" with feedback.
//!
//! Module map:
//! - [`data`]: seasons, CSV ingest, synthetic seasons, partitioning
//! - [`forecaster`]: the base model, its loss and exact gradients
//! - [`guidance`]: constraints and their per-instance deviation samples
//! - [`stats`]: Student-t distribution functions
//! - [`seldonian`]: confidence bounds, candidate selection, safety test
//! - [`modes`]: direct and automatic guidance, weekly sweeps
//! - [`eval`]: test-set evaluation, external forecast scoring, reports

pub mod data;
pub mod error;
pub mod eval;
pub mod forecaster;
pub mod guidance;
pub mod modes;
pub mod seldonian;
pub mod stats;

pub use error::{Error, Result};
