//! Desk-scale BWHT network: transform/threshold/inverse layers, a linear
//! classification head, the threshold-regularized loss, and SGD training
//! with surrogate gradients.

mod dataset;
mod layer;
mod loss;
mod model;
mod train;

pub use dataset::{linear_probe_accuracy, make_toy_dataset, Dataset, PROBE_ACCURACY};
pub use layer::{BwhtLayer, ExecMode, LayerCache, LayerMode};
pub use loss::{log_factor, loss_mod, softmax_cross_entropy, LossConfig, RegularizerDirection, G_EPS};
pub use model::{LinearHead, Model, ModelCache, ModelGrads};
pub use train::{accuracy, mean_cycles, train, EpochMetrics, TrainConfig, TrainPath, TrainReport, HIGH_G_LEVEL};
