//! Closed-form parameter and multiply-accumulate counts.
//!
//! A convolution costs `out_h·out_w·9·C_in·C_out` MACs per frame (padded taps
//! included), the classifier `features·classes`. Shift sites cost nothing.

use crate::model::config::NetworkConfig;

/// Trainable parameters; a shared stage counts once regardless of the number
/// of modalities.
pub fn param_count(cfg: &NetworkConfig) -> usize {
    let stages: usize = cfg
        .stages
        .iter()
        .map(|s| {
            let copies = if s.shared { 1 } else { cfg.modalities };
            copies * s.params_per_copy()
        })
        .sum();
    stages + classifier_params(cfg)
}

pub fn classifier_params(cfg: &NetworkConfig) -> usize {
    cfg.feature_len() * cfg.num_classes + cfg.num_classes
}

/// MACs of one forward pass. Every modality branch runs every stage, shared
/// or not.
pub fn mac_count(cfg: &NetworkConfig) -> u64 {
    let frames = cfg.input.frames as u64;
    let per_branch: u64 = cfg
        .stages
        .iter()
        .zip(cfg.stage_output_dims())
        .map(|(s, (_, h, w))| (h * w * 9 * s.in_channels * s.out_channels) as u64 * frames)
        .sum();
    per_branch * cfg.modalities as u64 + (cfg.feature_len() * cfg.num_classes) as u64
}
