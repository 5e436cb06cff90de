//! Minimum-energy control of unknown discrete-time LTI systems, computed
//! directly from batches of input / initial-state / final-state experiments.
//!
//! The crate is split by role:
//!
//! * [`matops`] holds the dense linear-algebra primitives (kernel bases,
//!   projectors, truncated pseudoinverses).
//! * [`lti`] simulates a known `(A, B)` pair and computes the model-based
//!   minimum-energy input. It is only used to generate data and to check
//!   the data-driven answers.
//! * [`datagen`] produces, perturbs and persists experiment datasets.
//! * [`ddctrl`] builds the data-based trajectory representation and the two
//!   closed-form data-driven minimum-energy inputs.
//! * [`noisectrl`] holds the bias-corrected variants for noisy data.

pub mod datagen;
pub mod ddctrl;
mod error;
pub mod lti;
pub mod matops;
pub mod noisectrl;

pub use error::{Error, Result};

/// Dense real matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense real column vector.
pub type Vector = nalgebra::DVector<f64>;
