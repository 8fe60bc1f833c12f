//! Joint training: log loss with L2 penalty, analytic gradients, mini-batch SGD.

pub mod config;
pub mod gradient;
pub mod sgd;
pub mod trainer;

pub use config::{RegKind, Sampling, TrainConfig};
pub use gradient::{data_loss, gradients, loss, loss_and_gradients, GradientBuffer};
pub use sgd::{init_params, sgd_step};
pub use trainer::{train, EpochRecord, TrainLog};
