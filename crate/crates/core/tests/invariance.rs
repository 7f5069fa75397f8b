//! Order-blind networks cannot see what the synthetic classes encode in time.

use dfs_core::model::{forward_full, InitScheme, InputDims, NetworkConfig, ParamStore};
use dfs_core::shift::{Fraction, ShiftConfig};
use dfs_core::synthdata::{
    generate_group, generate_samples, render_with_noise, Direction, GenConfig, Mode, SyncTiming,
};
use dfs_core::{ClipTensor, MultiModalSample};

fn net(input: InputDims, shift: ShiftConfig, shared: &[usize]) -> NetworkConfig {
    NetworkConfig::with_widths(2, 2, input, [8, 16, 16, 16, 16])
        .with_shift(shift)
        .share_stages(shared)
}

fn nonshift(input: InputDims) -> NetworkConfig {
    net(input, ShiftConfig::none(), &[])
}

fn temporal_only(input: InputDims) -> NetworkConfig {
    net(input, ShiftConfig { k_fraction: Fraction::ZERO, ..ShiftConfig::default() }, &[2, 3])
}

fn input_of(gc: &GenConfig) -> InputDims {
    InputDims { channels: 1, frames: gc.frames, height: gc.size, width: gc.size }
}

fn logit_bits(cfg: &NetworkConfig, params: &ParamStore, s: &MultiModalSample) -> Vec<u64> {
    forward_full(s, cfg, params).unwrap().0.iter().map(|v| v.to_bits()).collect()
}

#[test]
fn nonshift_logits_ignore_frame_reversal() {
    let gc = GenConfig { mode: Mode::Direction, samples_per_class: 30, seed: 9, ..GenConfig::default() };
    let cfg = nonshift(input_of(&gc));
    for seed in 0..2 {
        let params = ParamStore::init_with(&cfg, seed, InitScheme::He);
        for j in 0..gc.samples_per_class as u64 {
            let group = generate_group(&gc, j).unwrap();
            let (l, r) = (&group[0], &group[1]);
            assert_ne!(l.label, r.label);
            assert_eq!(r.clips, l.reverse_frames().clips);
            assert_eq!(logit_bits(&cfg, &params, l), logit_bits(&cfg, &params, r));
        }
    }
}

#[test]
fn temporal_shift_sees_direction() {
    let gc = GenConfig { mode: Mode::Direction, samples_per_class: 4, seed: 9, ..GenConfig::default() };
    let cfg = temporal_only(input_of(&gc));
    let params = ParamStore::init_with(&cfg, 0, InitScheme::He);
    let group = generate_group(&gc, 0).unwrap();
    assert_ne!(logit_bits(&cfg, &params, &group[0]), logit_bits(&cfg, &params, &group[1]));
}

#[test]
fn nonshift_logits_ignore_flash_timing() {
    let gc = GenConfig { mode: Mode::Sync, samples_per_class: 30, seed: 4, noise_std: 0.0, ..GenConfig::default() };
    let cfg = nonshift(input_of(&gc));
    let params = ParamStore::init_with(&cfg, 1, InitScheme::He);
    for j in 0..gc.samples_per_class as u64 {
        let pair = generate_group(&gc, j).unwrap();
        assert_ne!(pair[0].clips, pair[1].clips);
        assert_eq!(logit_bits(&cfg, &params, &pair[0]), logit_bits(&cfg, &params, &pair[1]));
    }
}

/// Noise-free same/next pair whose dot crosses the centre at frame `tau`.
fn sync_pair(gc: &GenConfig, direction: Direction, tau: usize, row: usize) -> [MultiModalSample; 2] {
    let zero = ClipTensor::zeros(1, gc.frames, gc.size, gc.size).unwrap();
    let start = match direction {
        Direction::Left => gc.center_col() + tau,
        Direction::Right => gc.center_col() - tau,
    };
    [SyncTiming::Same, SyncTiming::Next]
        .map(|s| render_with_noise(gc, direction, Some(s), row, start, &zero, &zero).unwrap())
}

// Four temporal sites let a frame see four neighbours on each side, and the
// zero-filled clip edges reach four frames in. When the flash and the frame
// after it are both at least eight frames from either edge, the two clips'
// per-frame features are the same multiset.
#[test]
fn temporal_only_logits_ignore_flash_timing_away_from_the_edges() {
    let gc = GenConfig { mode: Mode::Sync, frames: 20, size: 38, noise_std: 0.0, ..GenConfig::default() };
    gc.validate().unwrap();
    let input = input_of(&gc);
    for cfg in [temporal_only(input), nonshift(input)] {
        let params = ParamStore::init_with(&cfg, 2, InitScheme::He);
        for tau in 8..=gc.frames - 10 {
            for direction in [Direction::Left, Direction::Right] {
                for row in [4, 17, 35] {
                    let [same, next] = sync_pair(&gc, direction, tau, row);
                    assert_eq!(
                        logit_bits(&cfg, &params, &same),
                        logit_bits(&cfg, &params, &next),
                        "tau {tau} {direction:?} row {row}"
                    );
                }
            }
        }
    }
}

#[test]
fn modality_shift_sees_flash_timing() {
    let gc = GenConfig { mode: Mode::Sync, frames: 20, size: 38, noise_std: 0.0, ..GenConfig::default() };
    let cfg = net(input_of(&gc), ShiftConfig::default(), &[2, 3]);
    let params = ParamStore::init_with(&cfg, 2, InitScheme::He);
    let [same, next] = sync_pair(&gc, Direction::Left, 9, 17);
    assert_ne!(logit_bits(&cfg, &params, &same), logit_bits(&cfg, &params, &next));
}

#[test]
fn temporal_only_short_clips_feel_the_edges() {
    // with eight frames every flash is near an edge, so timing leaks through
    let gc = GenConfig { mode: Mode::Sync, samples_per_class: 10, noise_std: 0.0, ..GenConfig::default() };
    let cfg = temporal_only(input_of(&gc));
    let params = ParamStore::init_with(&cfg, 2, InitScheme::He);
    let samples = generate_samples(&gc).unwrap();
    let (same, next) = samples.split_at(gc.samples_per_class);
    let differing = same
        .iter()
        .zip(next)
        .filter(|(a, b)| logit_bits(&cfg, &params, a) != logit_bits(&cfg, &params, b))
        .count();
    assert!(differing > 0);
}
