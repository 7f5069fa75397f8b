use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::params::{GradStore, InitScheme, ParamStore};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub momentum: f64,
    pub init: InitScheme,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            epochs: 10,
            batch_size: 8,
            seed: 0,
            momentum: 0.0,
            init: InitScheme::Glorot,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Stochastic gradient descent with an optional heavy-ball momentum buffer:
/// `v ← μ·v + g`, `w ← w − lr·v` (with `μ = 0` this is `w ← w − lr·g`).
#[derive(Clone, Debug)]
pub struct Sgd {
    learning_rate: f64,
    momentum: f64,
    velocity: Option<ParamStore>,
}

impl Sgd {
    pub fn new(tc: &TrainConfig) -> Self {
        Self {
            learning_rate: tc.learning_rate,
            momentum: tc.momentum,
            velocity: None,
        }
    }

    /// Applies one update. A non-finite gradient aborts the step with the
    /// parameters untouched.
    pub fn step(&mut self, params: &mut ParamStore, grads: &GradStore) -> Result<()> {
        params.check_layout(grads)?;
        let mut bad = None;
        grads.for_each_block(|name, g| {
            if bad.is_none() && g.iter().any(|v| !v.is_finite()) {
                bad = Some(name.to_string());
            }
        });
        if let Some(name) = bad {
            return Err(Error::Numerics(format!("gradient block {name}")));
        }

        let lr = self.learning_rate;
        if self.momentum == 0.0 {
            let flat = grads.flatten();
            let mut off = 0;
            params.for_each_block_mut(|_, w| {
                for (w, g) in w.iter_mut().zip(&flat[off..]) {
                    *w -= lr * g;
                }
                off += w.len();
            });
            return Ok(());
        }

        let mu = self.momentum;
        let velocity = self.velocity.get_or_insert_with(|| grads.zeros_like());
        let flat = grads.flatten();
        let mut off = 0;
        velocity.for_each_block_mut(|_, v| {
            for (v, g) in v.iter_mut().zip(&flat[off..]) {
                *v = mu * *v + g;
            }
            off += v.len();
        });
        let vflat = velocity.flatten();
        let mut off = 0;
        params.for_each_block_mut(|_, w| {
            for (w, v) in w.iter_mut().zip(&vflat[off..]) {
                *w -= lr * v;
            }
            off += w.len();
        });
        Ok(())
    }
}

/// One plain update with a fresh optimizer state.
pub fn sgd_step(params: &mut ParamStore, grads: &GradStore, tc: &TrainConfig) -> Result<()> {
    Sgd::new(tc).step(params, grads)
}
