//! Sequential recommendation with singular spectrum smoothing.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`] holds dense matrices, a one-sided Jacobi SVD and the spectrum
//!   diagnostics (AUSC, the nuclear/Frobenius smoothing loss and its gradient).
//! * [`dpp`] is the determinant-based diversity toolkit: Gram kernels,
//!   incremental determinants and greedy MAP selection.
//! * [`data`] covers ingestion, 5-core filtering, leave-one-out splitting,
//!   negative sampling and a synthetic long-tail generator.
//! * [`model`] is the causal self-attention encoder with hand-written
//!   gradients, the regularised objective and the training loop.
//! * [`eval`] ranks all items and computes accuracy, diversity and
//!   degeneration reports.
//! * [`experiment`] wires the pieces into the pipelines the CLI exposes.

pub mod data;
pub mod dpp;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod linalg;
pub mod model;

pub use error::{Error, Result};

/// Version stamped into every JSON payload this crate emits.
pub const SCHEMA_VERSION: u32 = 1;
