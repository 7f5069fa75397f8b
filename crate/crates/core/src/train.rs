//! Mini-batch SGD training and evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::ConfusionMatrix;
use crate::model::loss::argmax;
use crate::model::{forward_clips, sample_gradient, NetworkConfig, ParamStore, Sgd, TrainConfig};
use crate::synthdata::MultiModalSample;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_top1: f64,
}

/// Runs the optimizer over a fixed training set, one epoch at a time.
pub struct Trainer<'a> {
    cfg: &'a NetworkConfig,
    tc: &'a TrainConfig,
    samples: &'a [MultiModalSample],
    optimizer: Sgd,
    epoch: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(
        cfg: &'a NetworkConfig,
        tc: &'a TrainConfig,
        samples: &'a [MultiModalSample],
    ) -> Result<Self> {
        cfg.validate()?;
        tc.validate()?;
        if samples.is_empty() {
            return Err(Error::InvalidInput("empty training set".into()));
        }
        for s in samples {
            if s.label >= cfg.num_classes {
                return Err(Error::InvalidLabel {
                    label: s.label,
                    num_classes: cfg.num_classes,
                });
            }
        }
        Ok(Self {
            cfg,
            tc,
            samples,
            optimizer: Sgd::new(tc),
            epoch: 0,
        })
    }

    /// Epoch order: a shuffle seeded by `(seed, epoch)`.
    fn order(&self) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.tc.seed);
        rng.set_stream(self.epoch as u64);
        let mut idx: Vec<usize> = (0..self.samples.len()).collect();
        idx.shuffle(&mut rng);
        idx
    }

    /// One pass over the data; returns the mean per-sample loss observed
    /// before each update.
    pub fn run_epoch(&mut self, params: &mut ParamStore) -> Result<f64> {
        let order = self.order();
        let mut total_loss = 0.0;
        for batch in order.chunks(self.tc.batch_size) {
            let mut acc: Option<ParamStore> = None;
            for &i in batch {
                let s = &self.samples[i];
                let (loss, _, g) = sample_gradient(&s.clips, s.label, self.cfg, params)?;
                total_loss += loss;
                match acc.as_mut() {
                    Some(a) => a.add_assign(&g)?,
                    None => acc = Some(g),
                }
            }
            let mut grads = acc.expect("non-empty batch");
            grads.scale(1.0 / batch.len() as f64);
            self.optimizer.step(params, &grads)?;
        }
        self.epoch += 1;
        let mean = total_loss / self.samples.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Numerics(format!("mean loss at epoch {}", self.epoch)));
        }
        Ok(mean)
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }
}

/// Trains for `tc.epochs` epochs, logging loss and post-epoch training
/// accuracy through `log`.
pub fn train(
    cfg: &NetworkConfig,
    tc: &TrainConfig,
    params: &mut ParamStore,
    samples: &[MultiModalSample],
    mut log: impl FnMut(&EpochLog),
) -> Result<Vec<EpochLog>> {
    let mut trainer = Trainer::new(cfg, tc, samples)?;
    let mut logs = Vec::with_capacity(tc.epochs);
    for epoch in 1..=tc.epochs {
        let mean_loss = trainer.run_epoch(params)?;
        let train_top1 = evaluate(cfg, params, samples)?.top1_accuracy()?;
        let entry = EpochLog {
            epoch,
            mean_loss,
            train_top1,
        };
        log(&entry);
        logs.push(entry);
    }
    Ok(logs)
}

/// Predicted class for each sample.
pub fn predict(
    cfg: &NetworkConfig,
    params: &ParamStore,
    samples: &[MultiModalSample],
) -> Result<Vec<usize>> {
    samples
        .iter()
        .map(|s| Ok(argmax(&forward_clips(&s.clips, cfg, params)?.0)))
        .collect()
}

pub fn evaluate(
    cfg: &NetworkConfig,
    params: &ParamStore,
    samples: &[MultiModalSample],
) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(cfg.num_classes);
    for (s, p) in samples.iter().zip(predict(cfg, params, samples)?) {
        cm.update(s.label, p)?;
    }
    Ok(cm)
}
