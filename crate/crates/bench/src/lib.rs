//! Fixed inputs for the criterion benches.

use dfs_core::model::{InputDims, NetworkConfig, ParamStore};
use dfs_core::ClipTensor;

/// Deterministic clip with values in (-1, 1).
pub fn clip(c: usize, t: usize, h: usize, w: usize, salt: usize) -> ClipTensor {
    ClipTensor::from_fn(c, t, h, w, |t, c, h, w| {
        let x = (t * 7919 + c * 104_729 + h * 131 + w * 17 + salt * 31) % 1000;
        x as f64 / 500.0 - 1.0
    })
    .expect("positive dims")
}

/// Two modalities of the same shape.
pub fn pair(shape: [usize; 4]) -> [ClipTensor; 2] {
    let [c, t, h, w] = shape;
    [clip(c, t, h, w, 0), clip(c, t, h, w, 1)]
}

/// Default two-modality network for the default input, seeded weights.
pub fn default_network() -> (NetworkConfig, ParamStore, [ClipTensor; 2]) {
    let cfg = NetworkConfig::default();
    let InputDims { channels, frames, height, width } = cfg.input;
    let params = ParamStore::init(&cfg, 0);
    (cfg, params, pair([channels, frames, height, width]))
}
