use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::config::NetworkConfig;
use crate::model::conv::ConvParams;

/// Bound of the uniform draw for conv weights. The classifier always uses
/// the Glorot bound.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitScheme {
    /// `±sqrt(6 / (fan_in + fan_out))`
    #[default]
    Glorot,
    /// `±sqrt(6 / fan_in)`, which keeps activation scale through ReLU stacks.
    He,
}

impl InitScheme {
    fn conv_bound(self, in_channels: usize, out_channels: usize) -> f64 {
        let fan_in = 9 * in_channels;
        match self {
            InitScheme::Glorot => (6.0 / (fan_in + 9 * out_channels) as f64).sqrt(),
            InitScheme::He => (6.0 / fan_in as f64).sqrt(),
        }
    }
}

/// Weights of one stage: a single set for a shared stage, one per modality
/// otherwise.
#[derive(Clone, Debug, PartialEq)]
pub enum StageParams {
    Shared(ConvParams),
    Separate(Vec<ConvParams>),
}

impl StageParams {
    pub fn for_modality(&self, m: usize) -> &ConvParams {
        match self {
            StageParams::Shared(p) => p,
            StageParams::Separate(ps) => &ps[m],
        }
    }

    pub fn for_modality_mut(&mut self, m: usize) -> &mut ConvParams {
        match self {
            StageParams::Shared(p) => p,
            StageParams::Separate(ps) => &mut ps[m],
        }
    }

    pub fn copies(&self) -> &[ConvParams] {
        match self {
            StageParams::Shared(p) => std::slice::from_ref(p),
            StageParams::Separate(ps) => ps,
        }
    }

    fn copies_mut(&mut self) -> &mut [ConvParams] {
        match self {
            StageParams::Shared(p) => std::slice::from_mut(p),
            StageParams::Separate(ps) => ps,
        }
    }
}

/// Fully connected head: `weight` is `features × classes` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weight: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }
}

/// All trainable parameters of a network.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore {
    pub stages: Vec<StageParams>,
    pub classifier: Linear,
}

/// Gradients share the parameter layout.
pub type GradStore = ParamStore;

impl ParamStore {
    /// Zero-valued store shaped for `cfg`.
    pub fn zeros(cfg: &NetworkConfig) -> Self {
        let stages = cfg
            .stages
            .iter()
            .map(|s| {
                let one = ConvParams::zeros(s.in_channels, s.out_channels);
                if s.shared {
                    StageParams::Shared(one)
                } else {
                    StageParams::Separate(vec![one; cfg.modalities])
                }
            })
            .collect();
        Self {
            stages,
            classifier: Linear::zeros(cfg.feature_len(), cfg.num_classes),
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(cfg: &NetworkConfig, seed: u64) -> Self {
        Self::init_with(cfg, seed, InitScheme::Glorot)
    }

    pub fn init_with(cfg: &NetworkConfig, seed: u64, scheme: InitScheme) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = Self::zeros(cfg);
        for stage in &mut store.stages {
            for p in stage.copies_mut() {
                let bound = scheme.conv_bound(p.in_channels, p.out_channels);
                p.weight
                    .iter_mut()
                    .for_each(|w| *w = rng.random_range(-bound..bound));
            }
        }
        let c = &mut store.classifier;
        let bound = (6.0 / (c.inputs + c.outputs) as f64).sqrt();
        c.weight
            .iter_mut()
            .for_each(|w| *w = rng.random_range(-bound..bound));
        store
    }

    /// Same layout with every value zero.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_block_mut(|_, b| b.fill(0.0));
        z
    }

    /// Visits every parameter array in storage order with a stable name.
    pub fn for_each_block(&self, mut f: impl FnMut(&str, &[f64])) {
        for (s, stage) in self.stages.iter().enumerate() {
            let shared = matches!(stage, StageParams::Shared(_));
            for (m, p) in stage.copies().iter().enumerate() {
                let tag = block_tag(s, shared, m);
                f(&format!("{tag}.weight"), &p.weight);
                f(&format!("{tag}.bias"), &p.bias);
            }
        }
        f("classifier.weight", &self.classifier.weight);
        f("classifier.bias", &self.classifier.bias);
    }

    pub fn for_each_block_mut(&mut self, mut f: impl FnMut(&str, &mut [f64])) {
        for (s, stage) in self.stages.iter_mut().enumerate() {
            let shared = matches!(stage, StageParams::Shared(_));
            for (m, p) in stage.copies_mut().iter_mut().enumerate() {
                let tag = block_tag(s, shared, m);
                f(&format!("{tag}.weight"), &mut p.weight);
                f(&format!("{tag}.bias"), &mut p.bias);
            }
        }
        f("classifier.weight", &mut self.classifier.weight);
        f("classifier.bias", &mut self.classifier.bias);
    }

    /// `(name, length)` of every block in storage order.
    pub fn block_layout(&self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        self.for_each_block(|name, b| out.push((name.to_string(), b.len())));
        out
    }

    pub fn num_params(&self) -> usize {
        let mut n = 0;
        self.for_each_block(|_, b| n += b.len());
        n
    }

    /// All values concatenated in storage order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.for_each_block(|_, b| out.extend_from_slice(b));
        out
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.for_each_block(|_, b| ok &= b.iter().all(|v| v.is_finite()));
        ok
    }

    /// `self += other`, elementwise; layouts must match.
    pub fn add_assign(&mut self, other: &ParamStore) -> Result<()> {
        self.check_layout(other)?;
        let flat = other.flatten();
        let mut off = 0;
        self.for_each_block_mut(|_, b| {
            for (d, s) in b.iter_mut().zip(&flat[off..]) {
                *d += s;
            }
            off += b.len();
        });
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.for_each_block_mut(|_, b| b.iter_mut().for_each(|v| *v *= factor));
    }

    pub fn check_layout(&self, other: &ParamStore) -> Result<()> {
        if self.block_layout() != other.block_layout() {
            return Err(Error::State("parameter layouts differ".into()));
        }
        Ok(())
    }

    /// Checks that the store has the shape `cfg` requires.
    pub fn check_config(&self, cfg: &NetworkConfig) -> Result<()> {
        if self.block_layout() != ParamStore::zeros(cfg).block_layout() {
            return Err(Error::State(
                "parameters do not match the network configuration".into(),
            ));
        }
        Ok(())
    }
}

fn block_tag(stage: usize, shared: bool, modality: usize) -> String {
    if shared {
        format!("stage{}.shared", stage + 1)
    } else {
        format!("stage{}.m{}", stage + 1, modality)
    }
}
