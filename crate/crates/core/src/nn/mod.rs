//! A small convolutional network with hand-written backward passes.

pub mod block;
pub mod checkpoint;
#[cfg(test)]
pub(crate) mod gradcheck;
pub mod head;
pub mod init;
pub mod layers;
pub mod loss;
pub mod network;
pub mod optim;
pub mod tensor;
pub mod train;

pub use block::WideResBlock;
pub use checkpoint::Checkpoint;
pub use head::{
    gap_head, gapt_head, pool, pool_backward, softmax_backward, softmax_positions, Pooling,
};
pub use layers::{BatchNorm3d, Conv3d, Gelu};
pub use loss::{class_weights_from, weighted_ce, ClassWeightTracker, LOG_EPS};
pub use network::{BatchLoss, Network, NetworkSpec};
pub use optim::{onecycle_lr, AdamW};
pub use tensor::{FeatureMap, Param, Tensor};
pub use train::{train, TrainConfig, TrainReport};
