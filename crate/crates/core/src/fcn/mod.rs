//! Two-branch fully convolutional path predictor with analytic gradients.

mod layers;
mod network;
mod tensor;
mod train;

pub use layers::{sigmoid, Activation, ConvSpec, LayerSpec};
pub use network::{
    build_reference_network, two_branch_layers, Gradients, LayerParams, NetworkModel,
    COARSE_CHANNELS, FINE_CHANNELS, REFERENCE_PARAM_RANGE,
};
pub use tensor::Tensor;
pub use train::{predict, train, EpochStats, Optimizer, Sample, TrainConfig, TrainingReport};
