//! Forward and backward passes of the multi-modal network.
//!
//! Pipeline per sample: stage 1 → shift site 1 → stage 2 → … → stage 5, then
//! per-modality global spatial average per frame, mean over frames, mean over
//! modalities, and a fully connected classifier.
//!
//! The frame and modality means sum their terms in sorted order, so the
//! result is bit-identical under any permutation of frames or modalities.

use crate::error::{Error, Result};
use crate::model::config::NetworkConfig;
use crate::model::conv::{conv2d_backward, conv2d_forward};
use crate::model::loss::{cross_entropy_grad, cross_entropy_loss};
use crate::model::params::{GradStore, ParamStore};
use crate::shift::{dual_shift, dual_shift_backward, modality_shift_backward};
use crate::synthdata::MultiModalSample;
use crate::tensor::ClipTensor;
use crate::trace::record_mults;

/// Intermediates of one forward pass, enough for exact backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardTape {
    /// `[stage][modality]` input of each stage, after the preceding shift.
    pub stage_inputs: Vec<Vec<ClipTensor>>,
    /// `[stage][modality]` post-ReLU output of each stage.
    pub stage_outputs: Vec<Vec<ClipTensor>>,
    /// Clip feature of each modality after spatial and temporal pooling.
    pub clip_features: Vec<Vec<f64>>,
    pub fused: Vec<f64>,
    pub logits: Vec<f64>,
}

impl ForwardTape {
    /// Recomputes the logits from the recorded fused feature.
    pub fn replay_logits(&self, params: &ParamStore) -> Vec<f64> {
        classify(&self.fused, params)
    }
}

/// Test hooks that deliberately break the backward pass.
#[derive(Clone, Copy, Debug, Default)]
pub struct BackwardHooks {
    /// Route gradients through shift sites with the temporal adjoint
    /// replaced by the identity.
    pub skip_temporal_adjoint: bool,
}

/// Sum of `values` in ascending order, times `scale`.
fn order_free_mean(values: &mut [f64], scale: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    record_mults(1);
    values.iter().sum::<f64>() * scale
}

fn classify(features: &[f64], params: &ParamStore) -> Vec<f64> {
    let fc = &params.classifier;
    let mut logits = fc.bias.clone();
    for (f, &x) in features.iter().enumerate() {
        let row = &fc.weight[f * fc.outputs..(f + 1) * fc.outputs];
        for (z, &w) in logits.iter_mut().zip(row) {
            *z += w * x;
        }
    }
    record_mults((fc.inputs * fc.outputs) as u64);
    logits
}

/// Global spatial average per frame, then the mean over frames.
fn pool_clip(x: &ClipTensor) -> Vec<f64> {
    let (c, frames, _, _) = x.dims();
    let plane = x.plane_len();
    let inv_plane = 1.0 / plane as f64;
    let inv_frames = 1.0 / frames as f64;
    let mut per_frame = vec![0.0; frames];
    (0..c)
        .map(|ch| {
            for (t, v) in per_frame.iter_mut().enumerate() {
                let band = &x.frame(t)[ch * plane..(ch + 1) * plane];
                *v = band.iter().sum::<f64>() * inv_plane;
            }
            record_mults(frames as u64);
            order_free_mean(&mut per_frame, inv_frames)
        })
        .collect()
}

fn check_inputs(clips: &[ClipTensor], cfg: &NetworkConfig) -> Result<()> {
    if clips.len() != cfg.modalities {
        return Err(Error::ShapeMismatch(format!(
            "sample has {} modalities, network expects {}",
            clips.len(),
            cfg.modalities
        )));
    }
    let d = cfg.input;
    for x in clips {
        if x.dims() != (d.channels, d.frames, d.height, d.width) {
            return Err(Error::ShapeMismatch(format!(
                "clip dims {:?} vs network input {:?}",
                x.dims(),
                (d.channels, d.frames, d.height, d.width)
            )));
        }
    }
    Ok(())
}

/// Runs the network on per-modality clips.
pub fn forward_clips(
    clips: &[ClipTensor],
    cfg: &NetworkConfig,
    params: &ParamStore,
) -> Result<(Vec<f64>, ForwardTape)> {
    check_inputs(clips, cfg)?;
    if params.stages.len() != cfg.stages.len() {
        return Err(Error::State("parameter stages do not match config".into()));
    }
    let mut stage_inputs = Vec::with_capacity(cfg.stages.len());
    let mut stage_outputs: Vec<Vec<ClipTensor>> = Vec::with_capacity(cfg.stages.len());
    let mut current: Vec<ClipTensor> = clips.to_vec();
    for (s, spec) in cfg.stages.iter().enumerate() {
        if s > 0 && cfg.shift.has_site(s) {
            current = dual_shift(&current, &cfg.shift, s)?;
        }
        let outputs = current
            .iter()
            .enumerate()
            .map(|(m, x)| {
                let mut y = conv2d_forward(x, params.stages[s].for_modality(m), spec.stride)?;
                y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
                Ok(y)
            })
            .collect::<Result<Vec<_>>>()?;
        stage_inputs.push(std::mem::replace(&mut current, outputs.clone()));
        stage_outputs.push(outputs);
    }

    let clip_features: Vec<Vec<f64>> = current.iter().map(pool_clip).collect();
    let inv_modalities = 1.0 / cfg.modalities as f64;
    let mut column = vec![0.0; cfg.modalities];
    let fused: Vec<f64> = (0..cfg.feature_len())
        .map(|f| {
            for (v, feat) in column.iter_mut().zip(&clip_features) {
                *v = feat[f];
            }
            order_free_mean(&mut column, inv_modalities)
        })
        .collect();
    let logits = classify(&fused, params);
    let tape = ForwardTape {
        stage_inputs,
        stage_outputs,
        clip_features,
        fused,
        logits: logits.clone(),
    };
    Ok((logits, tape))
}

/// Runs the network on a sample.
pub fn forward_full(
    sample: &MultiModalSample,
    cfg: &NetworkConfig,
    params: &ParamStore,
) -> Result<(Vec<f64>, ForwardTape)> {
    forward_clips(&sample.clips, cfg, params)
}

/// Gradients of the cross-entropy loss for `label` with respect to every
/// parameter. Shared stages receive the sum over modality branches.
pub fn backward_full(
    tape: &ForwardTape,
    label: usize,
    cfg: &NetworkConfig,
    params: &ParamStore,
) -> Result<GradStore> {
    backward_with_hooks(tape, label, cfg, params, BackwardHooks::default())
}

pub fn backward_with_hooks(
    tape: &ForwardTape,
    label: usize,
    cfg: &NetworkConfig,
    params: &ParamStore,
    hooks: BackwardHooks,
) -> Result<GradStore> {
    params.check_config(cfg)?;
    let stages = cfg.stages.len();
    let n = cfg.modalities;
    if tape.stage_inputs.len() != stages
        || tape.stage_outputs.len() != stages
        || tape.clip_features.len() != n
        || tape.stage_outputs.iter().any(|o| o.len() != n)
        || tape.fused.len() != cfg.feature_len()
        || tape.logits.len() != cfg.num_classes
    {
        return Err(Error::State("tape does not match the network".into()));
    }

    let mut grads = params.zeros_like();
    let dlogits = cross_entropy_grad(&tape.logits, label)?;

    let fc = &params.classifier;
    let gfc = &mut grads.classifier;
    let mut dfused = vec![0.0; fc.inputs];
    for (f, &x) in tape.fused.iter().enumerate() {
        let row = f * fc.outputs..(f + 1) * fc.outputs;
        for ((gw, &w), &dz) in gfc.weight[row.clone()]
            .iter_mut()
            .zip(&fc.weight[row])
            .zip(&dlogits)
        {
            *gw += x * dz;
            dfused[f] += w * dz;
        }
    }
    for (gb, &dz) in gfc.bias.iter_mut().zip(&dlogits) {
        *gb += dz;
    }

    // d(out)[t,c,h,w] = dfused[c] / (N · T · H·W)
    let last = &tape.stage_outputs[stages - 1];
    let (_, frames, _, _) = last[0].dims();
    let plane = last[0].plane_len();
    let scale = (1.0 / n as f64) * (1.0 / frames as f64) * (1.0 / plane as f64);
    let mut gouts: Vec<ClipTensor> = last
        .iter()
        .map(|y| {
            let mut g = ClipTensor::zeros(y.channels(), frames, y.height(), y.width())?;
            for t in 0..frames {
                let frame = g.frame_mut(t);
                for (c, &d) in dfused.iter().enumerate() {
                    frame[c * plane..(c + 1) * plane].fill(d * scale);
                }
            }
            Ok(g)
        })
        .collect::<Result<_>>()?;

    for s in (0..stages).rev() {
        let spec = &cfg.stages[s];
        let mut gins = Vec::with_capacity(n);
        for m in 0..n {
            let y = &tape.stage_outputs[s][m];
            let g = &mut gouts[m];
            for (gv, &yv) in g.data_mut().iter_mut().zip(y.data()) {
                if yv <= 0.0 {
                    *gv = 0.0;
                }
            }
            let gin = conv2d_backward(
                &tape.stage_inputs[s][m],
                g,
                params.stages[s].for_modality(m),
                spec.stride,
                grads.stages[s].for_modality_mut(m),
                s > 0,
            )?;
            if let Some(gin) = gin {
                gins.push(gin);
            }
        }
        if s == 0 {
            break;
        }
        gouts = if cfg.shift.has_site(s) {
            if hooks.skip_temporal_adjoint {
                let (k, _) = cfg.shift.bands(gins[0].channels())?;
                if n >= 2 {
                    modality_shift_backward(&gins, k)?
                } else {
                    gins
                }
            } else {
                dual_shift_backward(&gins, &cfg.shift, s)?
            }
        } else {
            gins
        };
    }
    Ok(grads)
}

/// Loss, logits and gradients for one labelled sample.
pub fn sample_gradient(
    clips: &[ClipTensor],
    label: usize,
    cfg: &NetworkConfig,
    params: &ParamStore,
) -> Result<(f64, Vec<f64>, GradStore)> {
    let (logits, tape) = forward_clips(clips, cfg, params)?;
    let loss = cross_entropy_loss(&logits, label)?;
    let grads = backward_full(&tape, label, cfg, params)?;
    Ok((loss, logits, grads))
}

/// Loss of one sample, forward only.
pub fn sample_loss(
    clips: &[ClipTensor],
    label: usize,
    cfg: &NetworkConfig,
    params: &ParamStore,
) -> Result<f64> {
    let (logits, _) = forward_clips(clips, cfg, params)?;
    cross_entropy_loss(&logits, label)
}
