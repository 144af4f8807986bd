use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::AutoencoderModel;
use crate::neural::{step_decay, AdamState};
use crate::rng::rng_from;
use crate::{Error, Result};

/// Loss is averaged over windows of this many iterations.
pub const HISTORY_WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub base_lr: f64,
    pub max_iters: usize,
    pub batch_size: usize,
    pub lr_drop_every: usize,
    pub lr_drop_factor: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            base_lr: 0.01,
            max_iters: 100_000,
            batch_size: 64,
            lr_drop_every: 20_000,
            lr_drop_factor: 0.1,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.lr_drop_every == 0 {
            return Err(Error::InvalidArgument("batch_size and lr_drop_every must be positive".into()));
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("base_lr must be positive, got {}", self.base_lr)));
        }
        if !(self.lr_drop_factor > 0.0 && self.lr_drop_factor < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "lr_drop_factor must lie in (0, 1), got {}",
                self.lr_drop_factor
            )));
        }
        Ok(())
    }

    pub fn lr_at(&self, iter: usize) -> f64 {
        step_decay(self.base_lr, iter, self.lr_drop_every, self.lr_drop_factor)
    }
}

/// Mean minibatch loss over the window ending at `iteration` (exclusive).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub iteration: usize,
    pub lr: f64,
    pub loss: f64,
}

/// Trains a copy of `model` with Adam.
///
/// Each minibatch is drawn from a single sequence-length stratum, the stratum
/// chosen with probability proportional to its size, so no padding or masking
/// is ever needed.
pub fn train(
    model: &AutoencoderModel,
    data: &[Vec<DVector<f64>>],
    cfg: &TrainConfig,
) -> Result<(AutoencoderModel, Vec<LossRecord>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let mut strata: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (idx, seq) in data.iter().enumerate() {
        if seq.is_empty() {
            return Err(Error::EmptySequence("train"));
        }
        strata.entry(seq.len()).or_default().push(idx);
    }
    let strata: Vec<Vec<usize>> = strata.into_values().collect();
    let pick_stratum = WeightedIndex::new(strata.iter().map(Vec::len))
        .map_err(|e| Error::InvalidArgument(format!("stratum weights: {e}")))?;

    let mut rng = rng_from(cfg.seed);
    let mut model = model.clone();
    let mut adam = AdamState::new(&model);
    let mut history = Vec::new();
    let mut window = 0.0;
    let mut in_window = 0usize;
    let mut batch: Vec<Vec<DVector<f64>>> = Vec::with_capacity(cfg.batch_size);

    for iter in 0..cfg.max_iters {
        let lr = cfg.lr_at(iter);
        let members = &strata[pick_stratum.sample(&mut rng)];
        batch.clear();
        let take = cfg.batch_size.min(members.len());
        for k in sample(&mut rng, members.len(), take) {
            batch.push(data[members[k]].clone());
        }

        let (loss, grad) = model.loss_and_grad(&batch)?;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                iteration: iter,
                lr,
                loss,
            });
        }
        adam.update(&mut model, &grad, lr).map_err(|e| match e {
            Error::NonFinite(_) => Error::Diverged {
                iteration: iter,
                lr,
                loss,
            },
            other => other,
        })?;

        window += loss;
        in_window += 1;
        if in_window == HISTORY_WINDOW || iter + 1 == cfg.max_iters {
            history.push(LossRecord {
                iteration: iter + 1,
                lr,
                loss: window / in_window as f64,
            });
            window = 0.0;
            in_window = 0;
        }
    }
    Ok((model, history))
}
