//! Dual feature shift for multi-modal video recognition.
//!
//! * [`tensor`]: the `(C, T, H, W)` clip tensor.
//! * [`shift`]: zero-multiplication modality and temporal channel shifts and
//!   their adjoints.
//! * [`model`]: five-stage network with shared stages, exact backprop, SGD,
//!   parameter/MAC accounting and the model file.
//! * [`synthdata`]: synthetic moving-dot/flash benchmark and its clip file.
//! * [`metrics`]: confusion matrix, top-1 and balanced accuracy.
//! * [`train`], [`gradcheck`]: training loop and finite-difference checks.

pub mod error;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod shift;
pub mod synthdata;
pub mod tensor;
pub mod trace;
pub mod train;

pub use error::{Error, Result};
pub use metrics::ConfusionMatrix;
pub use model::{NetworkConfig, ParamStore, StageSpec, TrainConfig};
pub use shift::{Fraction, ShiftConfig};
pub use synthdata::{DatasetManifest, GenConfig, Mode, MultiModalSample};
pub use tensor::{ChannelRange, ClipTensor};
pub use trace::count_mult_ops;
