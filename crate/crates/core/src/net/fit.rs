use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{adam_step, backward, forward_utterance, AdamState, Batch, ModelParams, Utterance};
use crate::error::{AaiError, Result};

/// Optimization schedule. Defaults: 50 epochs, batches of 5, Adam at 1e-4
/// with 1e-6 weight decay, learning rate halved after 3 stagnant epochs
/// (floor 1e-6), stop after 7.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainControl {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub early_stop_patience: usize,
    pub min_lr: f64,
    pub seed: u64,
}

impl Default for TrainControl {
    fn default() -> Self {
        TrainControl {
            max_epochs: 50,
            batch_size: 5,
            lr: 1e-4,
            weight_decay: 1e-6,
            plateau_factor: 0.5,
            plateau_patience: 3,
            early_stop_patience: 7,
            min_lr: 1e-6,
            seed: 0,
        }
    }
}

impl TrainControl {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(AaiError::config("batch_size must be at least 1"));
        }
        if self.plateau_patience == 0 || self.early_stop_patience == 0 {
            return Err(AaiError::config("patience values must be at least 1"));
        }
        if !(self.lr > 0.0) || !(self.min_lr >= 0.0) || !(self.weight_decay >= 0.0) {
            return Err(AaiError::config(
                "lr must be positive, min_lr and weight_decay non-negative",
            ));
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor <= 1.0) {
            return Err(AaiError::config("plateau_factor must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// One row of training history. Epoch 0 is the starting point, before any
/// update, and has no training loss.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: Option<f64>,
    pub val_loss: f64,
    pub lr: f64,
}

/// Splits `order` into batches. Consecutive buckets of four batches are
/// sorted by length first so that padding stays small.
pub fn make_batches(utts: &[Utterance], order: &[usize], batch_size: usize) -> Vec<Vec<usize>> {
    let bucket = 4 * batch_size.max(1);
    let mut out = Vec::new();
    for chunk in order.chunks(bucket) {
        let mut sorted = chunk.to_vec();
        sorted.sort_by_key(|&i| utts[i].len());
        out.extend(sorted.chunks(batch_size.max(1)).map(<[usize]>::to_vec));
    }
    out
}

/// Masked MSE pooled over every real frame of `utts`.
pub fn evaluate_loss(params: &ModelParams, utts: &[Utterance]) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for u in utts {
        let pred = forward_utterance(params, u.inputs.view(), u.embedding.view())?;
        if pred.dim() != u.targets.dim() {
            return Err(AaiError::invalid(format!(
                "utterance '{}' targets {:?} do not match predictions {:?}",
                u.id,
                u.targets.dim(),
                pred.dim()
            )));
        }
        for (p, t) in pred.iter().zip(u.targets.iter()) {
            sum += (p - t) * (p - t);
        }
        count += pred.len();
    }
    if count == 0 {
        return Err(AaiError::invalid("no frames to evaluate"));
    }
    Ok(sum / count as f64)
}

/// Trains with Adam, a plateau learning-rate schedule and early stopping on
/// the validation loss. Returns the parameters of the best validation epoch
/// (possibly the untouched input) together with the full history.
pub fn fit(
    params: ModelParams,
    train: &[Utterance],
    val: &[Utterance],
    ctrl: &TrainControl,
) -> Result<(ModelParams, Vec<EpochRecord>)> {
    fit_with_progress(params, train, val, ctrl, |_| {})
}

pub fn fit_with_progress<F>(
    mut params: ModelParams,
    train: &[Utterance],
    val: &[Utterance],
    ctrl: &TrainControl,
    mut on_epoch: F,
) -> Result<(ModelParams, Vec<EpochRecord>)>
where
    F: FnMut(&EpochRecord),
{
    ctrl.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(AaiError::config(format!(
            "training needs non-empty train and validation sets (got {} and {})",
            train.len(),
            val.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(ctrl.seed);
    let mut opt = AdamState::new(&params, ctrl.lr, ctrl.weight_decay);

    let initial = evaluate_loss(&params, val)?;
    let mut history = vec![EpochRecord {
        epoch: 0,
        train_loss: None,
        val_loss: initial,
        lr: opt.lr,
    }];
    on_epoch(&history[0]);
    let mut best_loss = initial;
    let mut best = params.clone();
    let mut stale = 0usize;
    let mut plateau = 0usize;

    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=ctrl.max_epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        let mut frames = 0usize;
        for idx in make_batches(train, &order, ctrl.batch_size) {
            let members: Vec<&Utterance> = idx.iter().map(|&i| &train[i]).collect();
            let batch = Batch::from_utterances(&members)?;
            let (loss, grads) = backward(&params, &batch)?;
            adam_step(&mut params, &grads, &mut opt);
            weighted += loss * batch.real_frames() as f64;
            frames += batch.real_frames();
        }
        let val_loss = evaluate_loss(&params, val)?;
        let record = EpochRecord {
            epoch,
            train_loss: Some(weighted / frames as f64),
            val_loss,
            lr: opt.lr,
        };
        on_epoch(&record);
        history.push(record);

        if val_loss < best_loss {
            best_loss = val_loss;
            best = params.clone();
            stale = 0;
            plateau = 0;
        } else {
            stale += 1;
            plateau += 1;
            if plateau >= ctrl.plateau_patience {
                opt.lr = (opt.lr * ctrl.plateau_factor).max(ctrl.min_lr);
                plateau = 0;
            }
            if stale >= ctrl.early_stop_patience {
                break;
            }
        }
    }
    Ok((best, history))
}
