//! The JSON run configuration and the four ablation presets.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use dfs_core::model::{InitScheme, InputDims, NetworkConfig, TrainConfig};
use dfs_core::shift::{Fraction, ShiftConfig};
use dfs_core::Mode;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkSection {
    pub modalities: usize,
    pub num_classes: usize,
    pub input: InputDims,
    /// Output channels of the five stages.
    pub widths: [usize; 5],
    pub strides: [usize; 5],
}

impl Default for NetworkSection {
    fn default() -> Self {
        let net = NetworkConfig::default();
        let mut widths = [0; 5];
        let mut strides = [0; 5];
        for (s, st) in net.stages.iter().enumerate() {
            widths[s] = st.out_channels;
            strides[s] = st.stride;
        }
        Self {
            modalities: net.modalities,
            num_classes: net.num_classes,
            input: net.input,
            widths,
            strides,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShiftSection {
    pub k_fraction: Fraction,
    pub i_fraction: Fraction,
    pub sites: Vec<usize>,
    pub modality_shift_enabled: bool,
    pub temporal_shift_enabled: bool,
    /// 1-based stages holding one weight set for all modalities.
    pub share_stages: Vec<usize>,
}

impl Default for ShiftSection {
    fn default() -> Self {
        let s = ShiftConfig::default();
        Self {
            k_fraction: s.k_fraction,
            i_fraction: s.i_fraction,
            sites: s.sites,
            modality_shift_enabled: true,
            temporal_shift_enabled: true,
            share_stages: vec![2, 3],
        }
    }
}

impl ShiftSection {
    /// A disabled mechanism is a band of width zero.
    pub fn shift_config(&self) -> ShiftConfig {
        let on = |enabled: bool, f: Fraction| if enabled { f } else { Fraction::ZERO };
        let k_fraction = on(self.modality_shift_enabled, self.k_fraction);
        let i_fraction = on(self.temporal_shift_enabled, self.i_fraction);
        let sites = if k_fraction.is_zero() && i_fraction.is_zero() {
            Vec::new()
        } else {
            self.sites.clone()
        };
        ShiftConfig { k_fraction, i_fraction, sites }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSection {
    pub dir: Option<PathBuf>,
    pub mode: Option<Mode>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub network: NetworkSection,
    pub train: TrainConfig,
    pub shift: ShiftSection,
    pub data: DataSection,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).context("parsing run config")?;
        cfg.network_config()?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// The validated network this config describes.
    pub fn network_config(&self) -> Result<NetworkConfig> {
        let n = &self.network;
        if let Some(mode) = self.data.mode {
            if mode.num_classes() != n.num_classes {
                bail!(
                    "{mode} data has {} classes but the network has {}",
                    mode.num_classes(),
                    n.num_classes
                );
            }
        }
        let mut cfg = NetworkConfig::with_widths(n.modalities, n.num_classes, n.input, n.widths)
            .with_shift(self.shift.shift_config())
            .share_stages(&self.shift.share_stages);
        for (st, &stride) in cfg.stages.iter_mut().zip(&n.strides) {
            st.stride = stride;
        }
        if let Some(&s) = self.shift.share_stages.iter().find(|&&s| s == 0 || s > 5) {
            bail!("cannot share stage {s}; stages are numbered 1 to 5");
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Small network and optimizer settings that train the synthetic task
    /// on one CPU core in about a minute.
    pub fn desk(mode: Mode) -> Self {
        RunConfig {
            network: NetworkSection {
                num_classes: mode.num_classes(),
                widths: [8, 16, 16, 16, 16],
                strides: [1, 2, 2, 2, 1],
                ..NetworkSection::default()
            },
            train: TrainConfig {
                learning_rate: 0.05,
                epochs: 100,
                batch_size: 8,
                seed: 0,
                momentum: 0.9,
                init: InitScheme::He,
            },
            shift: ShiftSection::default(),
            data: DataSection { dir: None, mode: Some(mode) },
        }
    }

    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        ablation.apply(&mut self.shift);
        self
    }
}

/// The settings of the shift/sharing ablation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    /// Modality and temporal shift, stages 2 and 3 shared.
    MtShared,
    /// Temporal shift only, stages 2 and 3 shared.
    TShared,
    /// Temporal shift only, no shared stages.
    TNonshared,
    /// No shift, no shared stages.
    Nonshift,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [
        Ablation::MtShared,
        Ablation::TShared,
        Ablation::TNonshared,
        Ablation::Nonshift,
    ];

    pub fn apply(self, shift: &mut ShiftSection) {
        let (modality, temporal, shared): (bool, bool, &[usize]) = match self {
            Ablation::MtShared => (true, true, &[2, 3]),
            Ablation::TShared => (false, true, &[2, 3]),
            Ablation::TNonshared => (false, true, &[]),
            Ablation::Nonshift => (false, false, &[]),
        };
        shift.modality_shift_enabled = modality;
        shift.temporal_shift_enabled = temporal;
        shift.share_stages = shared.to_vec();
    }

    pub fn label(self) -> &'static str {
        match self {
            Ablation::MtShared => "M+T, shared",
            Ablation::TShared => "T, shared",
            Ablation::TNonshared => "T, nonshared",
            Ablation::Nonshift => "Nonshift",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Ablation as clap::ValueEnum>::from_str(s, true)
    }
}
