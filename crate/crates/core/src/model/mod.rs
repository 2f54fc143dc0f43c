//! Network specifications, construction, cost accounting and checkpoints.

mod accounting;
mod checkpoint;
mod network;
mod spec;

pub use accounting::{count_flops, count_params, FlopCount, LayerCost, ParamCount};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use network::{BnUpdate, ConvBn, ForwardOutput, Network};
pub use spec::{BlockSpec, ConvSpec, LayerKind, LayerSpec, NetworkKind, NetworkSpec, DEFAULT_BN_EPS, DEFAULT_BN_MOMENTUM};
