//! Dense NCHW tensors with forward/backward kernels for the layer set used by
//! small depthwise-separable CNNs: grouped convolution, batch normalization,
//! ReLU/sigmoid, global average pooling, fully connected layers and the two
//! training losses (regression and softmax cross-entropy).
//!
//! Kernels are generic over [`Real`] so the same code paths run in `f32` for
//! training and in `f64` for finite-difference gradient checks.
//!
//! Work is split per sample (or per channel for reductions) and handed to
//! rayon when the `parallel` feature is on. Every reduction is performed in a
//! fixed order, so parallel and sequential runs are bit-identical.

mod error;
pub mod ops;
pub mod optim;
pub mod par;
mod param;
mod tape;
mod tensor;

pub use error::{Result, TensorError};
pub use ops::conv::Conv2dConfig;
pub use ops::loss::RegressionLoss;
pub use ops::norm::{BatchStats, BnMode, RunningStats};
pub use optim::Sgd;
pub use param::{BufferId, ParamId, ParamStore, Parameter};
pub use tape::{Tape, Var};
pub use tensor::Tensor;

use num_traits::{Float, FromPrimitive, NumAssign};
use std::fmt::Debug;
use std::iter::Sum;

/// Scalar element type for tensors.
pub trait Real: Float + NumAssign + FromPrimitive + Sum + Default + Debug + Send + Sync + 'static {
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
