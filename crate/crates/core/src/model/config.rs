use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::conv::out_extent;
use crate::shift::ShiftConfig;

/// One backbone stage: a 3×3 convolution followed by ReLU.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    /// One weight set for every modality instead of one per modality.
    pub shared: bool,
}

impl StageSpec {
    pub fn new(in_channels: usize, out_channels: usize, stride: usize, shared: bool) -> Self {
        Self {
            in_channels,
            out_channels,
            stride,
            shared,
        }
    }

    /// Weights plus biases of one copy of this stage.
    pub fn params_per_copy(&self) -> usize {
        9 * self.in_channels * self.out_channels + self.out_channels
    }
}

/// Per-modality clip geometry `(C, T, H, W)` the network is built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDims {
    pub channels: usize,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
}

impl Default for InputDims {
    fn default() -> Self {
        Self {
            channels: 1,
            frames: 8,
            height: 16,
            width: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub modalities: usize,
    pub num_classes: usize,
    pub input: InputDims,
    pub stages: Vec<StageSpec>,
    pub shift: ShiftConfig,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self::with_widths(2, 4, InputDims::default(), [16, 32, 64, 64, 64])
    }
}

impl NetworkConfig {
    /// Five stages with the given output widths, strides `2,2,2,1,1`, stages
    /// 2 and 3 shared and the default shift configuration.
    pub fn with_widths(
        modalities: usize,
        num_classes: usize,
        input: InputDims,
        widths: [usize; 5],
    ) -> Self {
        let strides = [2, 2, 2, 1, 1];
        let mut stages = Vec::with_capacity(5);
        let mut cin = input.channels;
        for (s, (&w, &stride)) in widths.iter().zip(&strides).enumerate() {
            stages.push(StageSpec::new(cin, w, stride, s == 1 || s == 2));
            cin = w;
        }
        Self {
            modalities,
            num_classes,
            input,
            stages,
            shift: ShiftConfig::default(),
        }
    }

    /// Marks exactly the 1-based stages in `shared` as shared.
    pub fn share_stages(mut self, shared: &[usize]) -> Self {
        for (s, st) in self.stages.iter_mut().enumerate() {
            st.shared = shared.contains(&(s + 1));
        }
        self
    }

    pub fn with_shift(mut self, shift: ShiftConfig) -> Self {
        self.shift = shift;
        self
    }

    /// Channel count of the fused feature vector.
    pub fn feature_len(&self) -> usize {
        self.stages.last().map_or(self.input.channels, |s| s.out_channels)
    }

    /// Output `(C, H, W)` of every stage.
    pub fn stage_output_dims(&self) -> Vec<(usize, usize, usize)> {
        let (mut h, mut w) = (self.input.height, self.input.width);
        self.stages
            .iter()
            .map(|s| {
                h = out_extent(h, s.stride);
                w = out_extent(w, s.stride);
                (s.out_channels, h, w)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.modalities == 0 {
            return Err(Error::Config("network needs at least one modality".into()));
        }
        if self.num_classes == 0 {
            return Err(Error::Config("network needs at least one class".into()));
        }
        let d = self.input;
        if d.channels == 0 || d.frames == 0 || d.height == 0 || d.width == 0 {
            return Err(Error::Config(format!("input dims must be >= 1: {d:?}")));
        }
        if self.stages.is_empty() {
            return Err(Error::Config("network needs at least one stage".into()));
        }
        let mut cin = d.channels;
        for (s, st) in self.stages.iter().enumerate() {
            if st.in_channels != cin {
                return Err(Error::Config(format!(
                    "stage {} expects {} input channels but receives {}",
                    s + 1,
                    st.in_channels,
                    cin
                )));
            }
            if st.out_channels == 0 {
                return Err(Error::Config(format!("stage {} has no outputs", s + 1)));
            }
            if st.stride != 1 && st.stride != 2 {
                return Err(Error::Config(format!(
                    "stage {} stride {} not in {{1, 2}}",
                    s + 1,
                    st.stride
                )));
            }
            cin = st.out_channels;
        }
        self.shift.validate(self.stages.len())?;
        for &site in &self.shift.sites {
            self.shift.bands(self.stages[site - 1].out_channels)?;
        }
        Ok(())
    }
}
