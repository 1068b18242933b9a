use std::fmt::Write as _;
use std::ops::ControlFlow;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Fcrg, ModelError, Result};
use crate::corpus::{batches, EncodedPair};
use crate::tensor::{adam_step, clip_gradients, Real, TrainConfig};

/// Stops after `patience` consecutive epochs without a strict improvement.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    bad_epochs: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            bad_epochs: 0,
        }
    }

    /// Records a validation value; returns whether it is a new best.
    pub fn observe(&mut self, epoch: usize, value: f64) -> bool {
        if value < self.best {
            self.best = value;
            self.best_epoch = epoch;
            self.bad_epochs = 0;
            true
        } else {
            self.bad_epochs += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.bad_epochs >= self.patience
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Per-token training NLL, with dropout, averaged over the epoch.
    pub train_nll: f64,
    /// Per-token validation NLL without dropout.
    pub valid_nll: f64,
    pub improved: bool,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_valid_nll: f64,
    pub stopped_early: bool,
}

/// Mini-batch training with Adam and global-norm clipping. The model is left
/// holding the parameters of the best validation epoch.
pub fn train<T: Real>(
    model: &mut Fcrg<T>,
    train: &[EncodedPair],
    valid: &[EncodedPair],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    train_until(model, train, valid, config, |r| {
        on_epoch(r);
        ControlFlow::Continue(())
    })
}

/// [`train`] with a callback that can end training after any epoch.
pub fn train_until<T: Real>(
    model: &mut Fcrg<T>,
    train: &[EncodedPair],
    valid: &[EncodedPair],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord) -> ControlFlow<()>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() || valid.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut stopper = EarlyStopping::new(config.early_stop_patience);
    let mut best_params = model.params().clone();
    let mut history = Vec::new();
    let mut step = 0u64;
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        let shuffle_seed: u64 = rng.random();
        let (mut total, mut tokens) = (0.0, 0usize);
        let iter = batches(train, config.batch_size, Some(shuffle_seed))
            .map_err(|e| ModelError::Config(e.to_string()))?;
        for (bi, batch) in iter.enumerate() {
            let pairs: Vec<EncodedPair> = (0..batch.len())
                .map(|i| EncodedPair {
                    source_ids: batch.source_row(i).to_vec(),
                    target_ids: batch.target_row(i).to_vec(),
                })
                .collect();
            let summary = model.accumulate_gradients(&pairs, Some(&mut rng as &mut dyn RngCore))?;
            if !summary.total.is_finite() || !model.params().grad_norm().is_finite() {
                return Err(ModelError::Diverged {
                    epoch,
                    batch: bi + 1,
                });
            }
            total += summary.total;
            tokens += summary.tokens;
            clip_gradients(model.params_mut(), config.clip_norm);
            step += 1;
            adam_step(model.params_mut(), config, step)?;
        }
        let valid_nll = model.sequence_nll(valid)?.per_token();
        if !valid_nll.is_finite() {
            return Err(ModelError::Diverged { epoch, batch: 0 });
        }
        let improved = stopper.observe(epoch, valid_nll);
        if improved {
            best_params = model.params().clone();
        }
        let record = EpochRecord {
            epoch,
            train_nll: total / tokens as f64,
            valid_nll,
            improved,
        };
        let flow = on_epoch(&record);
        history.push(record);
        if stopper.should_stop() || flow.is_break() {
            stopped_early = true;
            break;
        }
    }
    *model.params_mut() = best_params;
    Ok(TrainOutcome {
        history,
        best_epoch: stopper.best_epoch(),
        best_valid_nll: stopper.best(),
        stopped_early,
    })
}

/// Tab-separated epoch log with a header line.
pub fn format_history(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch\ttrain_nll\tvalid_nll\tvalid_ppl\timproved\n");
    for r in history {
        writeln!(
            out,
            "{}\t{:.6}\t{:.6}\t{:.6}\t{}",
            r.epoch,
            r.train_nll,
            r.valid_nll,
            r.valid_nll.exp(),
            r.improved
        )
        .expect("write to string");
    }
    out
}
