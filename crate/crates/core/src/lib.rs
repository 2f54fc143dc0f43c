//! Face quality assessment: the tinyFQnet quality regressor, its
//! training-data pipeline (recognizer, pseudo-labels, histogram-smoothed
//! sampling) and template-level evaluation.

pub mod artifact;
pub mod degrade;
pub mod error;
pub mod eval;
pub mod labeler;
pub mod manifest;
pub mod model;
pub mod preprocess;
pub mod sampler;
pub mod stats;
pub mod synth;
pub mod trainer;

pub use error::{FqaError, Result};
