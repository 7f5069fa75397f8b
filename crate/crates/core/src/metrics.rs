//! Top-1 and balanced accuracy over a confusion matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `counts[true][predicted]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self {
            counts: vec![vec![0; num_classes]; num_classes],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if counts.iter().any(|row| row.len() != k) {
            return Err(Error::ShapeMismatch("confusion matrix must be square".into()));
        }
        Ok(Self { counts })
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn update(&mut self, true_label: usize, predicted: usize) -> Result<()> {
        let k = self.num_classes();
        for label in [true_label, predicted] {
            if label >= k {
                return Err(Error::InvalidLabel {
                    label,
                    num_classes: k,
                });
            }
        }
        self.counts[true_label][predicted] += 1;
        Ok(())
    }

    /// Cell-wise sum, for reducing per-worker matrices.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.num_classes() != self.num_classes() {
            return Err(Error::ShapeMismatch(format!(
                "merging {}-class and {}-class matrices",
                self.num_classes(),
                other.num_classes()
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn top1_accuracy(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::EmptyEval);
        }
        Ok(self.trace() as f64 / total as f64)
    }

    /// Mean per-class recall over classes that have at least one sample.
    pub fn balanced_accuracy(&self) -> Result<f64> {
        let recalls: Vec<f64> = self
            .counts
            .iter()
            .enumerate()
            .filter_map(|(i, row)| {
                let n: u64 = row.iter().sum();
                (n > 0).then(|| row[i] as f64 / n as f64)
            })
            .collect();
        if recalls.is_empty() {
            return Err(Error::EmptyEval);
        }
        Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
    }
}

pub fn confusion_update(cm: &mut ConfusionMatrix, true_label: usize, predicted: usize) -> Result<()> {
    cm.update(true_label, predicted)
}

pub fn top1_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    cm.top1_accuracy()
}

pub fn balanced_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    cm.balanced_accuracy()
}
