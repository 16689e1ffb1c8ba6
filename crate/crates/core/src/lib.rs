//! Shapelet-guided condensation of time-series classification datasets.
//!
//! The pipeline runs in three stages:
//!
//! 1. [`shapelet::discover`] finds discriminative subsequences with a pruned,
//!    position-constrained search.
//! 2. [`teacher::train_teacher`] fits a 1D CNN whose classifier also sees the
//!    shapelet-transform features of its input.
//! 3. [`synthesis::synthesize`] optimizes a handful of sequences per class
//!    against the frozen teacher while matching its batch-norm statistics, then
//!    relabels them with the teacher's soft predictions.
//!
//! [`eval`] trains fresh students on the result; [`bench`] checks the
//! operation-count cost model of the discovery stage.

pub mod bench;
pub mod data;
pub mod error;
pub mod eval;
pub mod nn;
pub mod shapelet;
pub mod synthesis;
pub mod teacher;
pub mod tensor;
pub mod toy;
pub mod train;

pub use error::{Error, Result};
