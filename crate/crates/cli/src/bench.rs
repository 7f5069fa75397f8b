//! Kernel latencies and closed-form costs for the `bench` command.
//!
//! Protocol: one thread, `warmup` untimed calls, then `iters` timed calls
//! of each kernel on fixed random inputs; mean and minimum wall time.

use std::hint::black_box;
use std::time::Instant;

use anyhow::{bail, Result};
use dfs_core::model::{forward_clips, mac_count, param_count, InputDims, NetworkConfig, ParamStore};
use dfs_core::shift::{
    dual_shift, modality_shift_into, modality_shift_pair, temporal_shift, temporal_shift_into,
    ShiftConfig,
};
use dfs_core::{count_mult_ops, ClipTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const PROTOCOL: &str = "single thread; untimed warmup calls, then timed calls on fixed inputs; \
    modality_shift and temporal_shift write into preallocated outputs, dual_shift allocates; \
    forward_full is one two-modality sample through the default network";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelBench {
    pub name: String,
    pub mean_ms: f64,
    pub min_ms: f64,
    /// Bytes written into shifted bands per call; absent for the network.
    pub bytes_moved: Option<u64>,
    pub mult_ops: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkCost {
    pub name: String,
    pub param_count: usize,
    pub mac_count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub shape: [usize; 4],
    pub iters: usize,
    pub warmup: usize,
    pub protocol: String,
    pub kernels: Vec<KernelBench>,
    pub networks: Vec<NetworkCost>,
}

/// Parses `C,T,H,W`.
pub fn parse_shape(s: &str) -> Result<[usize; 4]> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| anyhow::anyhow!("shape {s:?}: {e}"))?;
    match <[usize; 4]>::try_from(parts) {
        Ok(dims) if dims.iter().all(|&d| d > 0) => Ok(dims),
        _ => bail!("shape must be four positive integers C,T,H,W, got {s:?}"),
    }
}

fn time_ms<R>(warmup: usize, iters: usize, mut f: impl FnMut() -> R) -> (f64, f64) {
    for _ in 0..warmup {
        black_box(f());
    }
    let mut total = 0.0;
    let mut min = f64::INFINITY;
    for _ in 0..iters {
        let start = Instant::now();
        black_box(f());
        let ms = start.elapsed().as_secs_f64() * 1e3;
        total += ms;
        min = min.min(ms);
    }
    (total / iters as f64, min)
}

/// Band bytes written by one modality shift of a two-modality pair.
pub fn modality_shift_bytes(shape: [usize; 4], k: usize) -> u64 {
    let [_, t, h, w] = shape;
    (2 * k * t * h * w * 8) as u64
}

/// Band bytes written by one temporal shift, zero fill included.
pub fn temporal_shift_bytes(shape: [usize; 4], i: usize) -> u64 {
    let [_, t, h, w] = shape;
    (2 * i * t * h * w * 8) as u64
}

/// Default network for the shape, with the given modality count and
/// sharing.
pub fn bench_network(shape: [usize; 4], modalities: usize, shared: bool) -> NetworkConfig {
    let [c, t, h, w] = shape;
    let input = InputDims { channels: c, frames: t, height: h, width: w };
    let base = NetworkConfig::default();
    let mut cfg = NetworkConfig { modalities, input, ..base.clone() };
    cfg.stages[0].in_channels = c;
    if !shared {
        cfg = cfg.share_stages(&[]);
    }
    cfg
}

pub fn cmd_bench(shape: [usize; 4], iters: usize, warmup: usize) -> Result<BenchReport> {
    if iters == 0 {
        bail!("iters must be at least 1");
    }
    let [c, t, h, w] = shape;
    let shift = ShiftConfig::default();
    let (k, i) = shift.bands(c)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut clip = || ClipTensor::from_fn(c, t, h, w, |_, _, _, _| rng.random_range(-1.0..1.0));
    let pair = [clip()?, clip()?];

    let mut kernels = Vec::new();
    let mut run = |name: &str, bytes: Option<u64>, mults: u64, timing: (f64, f64)| {
        kernels.push(KernelBench {
            name: name.into(),
            mean_ms: timing.0,
            min_ms: timing.1,
            bytes_moved: bytes,
            mult_ops: mults,
        });
    };

    // shift kernels write into preallocated outputs so the allocator stays
    // out of the measurement
    let refs = [&pair[0], &pair[1]];
    let mut outs = pair.clone();
    let (_, m) = count_mult_ops(|| modality_shift_pair(&pair[0], &pair[1], k));
    let timing = time_ms(warmup, iters, || modality_shift_into(&refs, k, &mut outs));
    run("modality_shift", Some(modality_shift_bytes(shape, k)), m, timing);

    let (_, m) = count_mult_ops(|| temporal_shift(&pair[0], i));
    let timing = time_ms(warmup, iters, || temporal_shift_into(&pair[0], i, &mut outs[0]));
    run("temporal_shift", Some(temporal_shift_bytes(shape, i)), m, timing);

    let (_, m) = count_mult_ops(|| dual_shift(&pair, &shift, 1));
    let timing = time_ms(warmup, iters, || dual_shift(&pair, &shift, 1));
    let bytes = modality_shift_bytes(shape, k) + 2 * temporal_shift_bytes(shape, i);
    run("dual_shift", Some(bytes), m, timing);

    let net = bench_network(shape, 2, true);
    net.validate()?;
    let params = ParamStore::init(&net, 0);
    let (_, m) = count_mult_ops(|| forward_clips(&pair, &net, &params));
    let timing = time_ms(warmup, iters, || forward_clips(&pair, &net, &params));
    run("forward_full", None, m, timing);

    let networks = [
        ("single-modality", bench_network(shape, 1, true)),
        ("dual-shared", bench_network(shape, 2, true)),
        ("dual-nonshared", bench_network(shape, 2, false)),
    ]
    .into_iter()
    .map(|(name, cfg)| {
        cfg.validate()?;
        Ok(NetworkCost {
            name: name.into(),
            param_count: param_count(&cfg),
            mac_count: mac_count(&cfg),
        })
    })
    .collect::<Result<Vec<_>>>()?;

    Ok(BenchReport {
        shape,
        iters,
        warmup,
        protocol: PROTOCOL.into(),
        kernels,
        networks,
    })
}
