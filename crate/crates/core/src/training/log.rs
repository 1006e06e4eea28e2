use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-epoch losses of one training run. Epochs are numbered from 1.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainLog {
    pub fn epochs_run(&self) -> usize {
        self.val_loss.len()
    }

    pub fn best_val_loss(&self) -> Option<f64> {
        self.best_epoch.checked_sub(1).map(|i| self.val_loss[i])
    }

    pub(crate) fn record(&mut self, train: f64, val: f64) -> bool {
        self.train_loss.push(train);
        self.val_loss.push(val);
        let improved = self.best_val_loss().is_none_or(|best| val < best);
        if improved {
            self.best_epoch = self.val_loss.len();
        }
        improved
    }

    /// Columns: epoch, train_loss, val_loss.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "train_loss", "val_loss"])?;
        for (i, (t, v)) in self.train_loss.iter().zip(&self.val_loss).enumerate() {
            w.write_record([(i + 1).to_string(), t.to_string(), v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<train log>", e))?;
        Ok(())
    }
}

/// True once more than `patience` epochs have passed since the lowest
/// validation loss. Only strict decreases count as improvement.
pub fn early_stop_check(val_losses: &[f64], patience: usize) -> bool {
    let Some(first) = val_losses.first() else {
        return false;
    };
    let mut best = *first;
    let mut best_at = 0;
    for (i, &v) in val_losses.iter().enumerate().skip(1) {
        if v < best {
            best = v;
            best_at = i;
        }
    }
    val_losses.len() - 1 - best_at > patience
}
