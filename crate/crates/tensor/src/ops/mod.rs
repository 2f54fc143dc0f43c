//! Forward and backward kernels. The functions here are pure; [`crate::Tape`]
//! records which ones ran and replays their backward halves.

pub mod activation;
pub mod conv;
pub mod linear;
pub mod loss;
pub mod norm;
pub mod pool;

pub use activation::{relu, sigmoid};
pub use conv::conv2d;
pub use linear::linear;
pub use loss::{regression_loss, softmax_cross_entropy};
pub use norm::batchnorm;
pub use pool::global_avgpool;
