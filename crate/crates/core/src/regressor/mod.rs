//! The IoU regressor head.
//!
//! Each branch is `input -> h1 (ReLU) -> h2 (ReLU) -> 1 (logistic)`. The decoupled variant has
//! independent purity and integrity branches whose outputs `s` and `t` are recombined into an
//! IoU estimate `c = s*t / (s + t - s*t)`; the direct variant regresses IoU with one branch.
//! Training minimizes the sum of soft-target BCE losses on `s`, `t` and `c` (direct: on the
//! single output) with momentum SGD and hand-written backpropagation.

mod checkpoint;
mod loss;
mod network;
mod optim;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use loss::{backward, bce, bce_with_eps, dir_loss, DirLoss, Losses, DEFAULT_BCE_EPS};
pub use network::{BranchCache, BranchParams, Dense, DirModelParams, ForwardPass, Prediction, Variant};
pub use optim::{sgd_step, OptimConfig, OptimizerState};
pub use train::{train, train_on, EpochStats, ModelConfig, TrainReport};
