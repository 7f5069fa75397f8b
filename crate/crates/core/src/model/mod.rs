//! Five-stage per-modality network with shared middle stages, shift sites
//! between stages, average fusion and a linear classifier.

pub mod accounting;
pub mod config;
pub mod conv;
pub mod io;
pub mod loss;
pub mod network;
pub mod params;
pub mod sgd;

pub use accounting::{mac_count, param_count};
pub use config::{InputDims, NetworkConfig, StageSpec};
pub use conv::{conv2d_backward, conv2d_forward, ConvParams};
pub use io::{load_model, save_model};
pub use loss::{argmax, cross_entropy_loss, softmax};
pub use network::{
    backward_full, backward_with_hooks, forward_clips, forward_full, sample_gradient,
    sample_loss, BackwardHooks, ForwardTape,
};
pub use params::{GradStore, InitScheme, Linear, ParamStore, StageParams};
pub use sgd::{sgd_step, Sgd, TrainConfig};
