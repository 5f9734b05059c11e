//! Huber loss, AdaDelta and the minibatch loop shared by both neural models.

use std::io::Write;

use crate::datapipe::Sample;
use crate::harness::relative_error;
use crate::model::NeuralRegressor;
use crate::{Error, Matrix, Result, SeededRng};

fn check_pair(pred: &[f64], target: &[f64]) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::shape(format!("{} predictions for {} targets", pred.len(), target.len())));
    }
    if pred.is_empty() {
        return Err(Error::argument("loss needs at least one prediction"));
    }
    Ok(())
}

/// Smooth-L1 term for one residual: quadratic below 1, linear above.
#[inline]
pub fn huber_term(diff: f64) -> f64 {
    let a = diff.abs();
    if a < 1.0 {
        0.5 * diff * diff
    } else {
        a - 0.5
    }
}

/// Mean Huber loss.
pub fn huber_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_pair(pred, target)?;
    let total: f64 = pred.iter().zip(target).map(|(p, t)| huber_term(p - t)).sum();
    Ok(total / pred.len() as f64)
}

/// Derivative of [`huber_loss`] w.r.t. each prediction: `clip(p - t, -1, 1) / n`.
pub fn huber_grad(pred: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    check_pair(pred, target)?;
    let n = pred.len() as f64;
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t).clamp(-1.0, 1.0) / n).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaDeltaConfig {
    pub rho: f64,
    pub epsilon: f64,
    /// Multiplier on every update; 1.0 is the plain method.
    pub lr_scale: f64,
}

impl Default for AdaDeltaConfig {
    fn default() -> Self {
        Self { rho: 0.95, epsilon: 1e-6, lr_scale: 1.0 }
    }
}

/// Per-tensor running averages of squared gradients and squared updates.
#[derive(Clone, Debug)]
pub struct AdaDelta {
    config: AdaDeltaConfig,
    sq_grad: Vec<Matrix>,
    sq_update: Vec<Matrix>,
}

impl AdaDelta {
    pub fn new(config: AdaDeltaConfig, shapes: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if !(config.rho > 0.0 && config.rho < 1.0) {
            return Err(Error::argument(format!("rho must lie in (0, 1), got {}", config.rho)));
        }
        if !(config.epsilon > 0.0) {
            return Err(Error::argument(format!("epsilon must be positive, got {}", config.epsilon)));
        }
        let sq_grad: Vec<Matrix> = shapes.into_iter().map(|(r, c)| Matrix::zeros(r, c)).collect();
        let sq_update = sq_grad.clone();
        Ok(Self { config, sq_grad, sq_update })
    }

    pub fn for_model<M: NeuralRegressor>(config: AdaDeltaConfig, model: &M) -> Result<Self> {
        Self::new(config, model.params().iter().map(|(_, m)| m.shape()))
    }

    pub fn config(&self) -> AdaDeltaConfig {
        self.config
    }

    pub fn sq_grad(&self) -> &[Matrix] {
        &self.sq_grad
    }

    pub fn sq_update(&self) -> &[Matrix] {
        &self.sq_update
    }

    /// `E[g^2] <- rho E[g^2] + (1-rho) g^2`,
    /// `dx = -lr * sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g`,
    /// `E[dx^2] <- rho E[dx^2] + (1-rho) dx^2`, `param += dx`.
    pub fn step(&mut self, params: &mut [&mut Matrix], grads: &[Matrix]) -> Result<()> {
        if params.len() != self.sq_grad.len() || grads.len() != self.sq_grad.len() {
            return Err(Error::shape(format!(
                "optimizer tracks {} tensors, got {} parameters and {} gradients",
                self.sq_grad.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.sq_grad[i].shape() {
                return Err(Error::shape(format!(
                    "tensor {i}: parameter {:?}, gradient {:?}, state {:?}",
                    p.shape(),
                    g.shape(),
                    self.sq_grad[i].shape()
                )));
            }
        }
        let AdaDeltaConfig { rho, epsilon, lr_scale } = self.config;
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let eg = self.sq_grad[i].data_mut();
            let ex = self.sq_update[i].data_mut();
            for (((w, &gv), a), b) in p.data_mut().iter_mut().zip(g.data()).zip(eg).zip(ex) {
                *a = rho * *a + (1.0 - rho) * gv * gv;
                let dx = -((*b + epsilon).sqrt() / (*a + epsilon).sqrt()) * gv * lr_scale;
                *b = rho * *b + (1.0 - rho) * dx * dx;
                *w += dx;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many epochs without a better validation error.
    pub patience: usize,
    pub seed: u64,
    pub optimizer: AdaDeltaConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { batch_size: 90, max_epochs: 200, patience: 20, seed: 0, optimizer: AdaDeltaConfig::default() }
    }
}

/// Inverse of the target z-score: `original = value * std + mean`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetScale {
    pub mean: f64,
    pub std: f64,
}

impl TargetScale {
    pub const IDENTITY: TargetScale = TargetScale { mean: 0.0, std: 1.0 };

    #[inline]
    pub fn restore(&self, value: f64) -> f64 {
        value * self.std + self.mean
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_huber: f64,
    pub val_rel_err: f64,
}

#[derive(Clone, Debug)]
pub struct FitReport<M> {
    /// Parameters after the epoch with the lowest validation error.
    pub best: M,
    pub best_epoch: usize,
    /// Parameters after the last epoch that ran.
    pub last: M,
    pub history: Vec<EpochRecord>,
}

/// Predictions for `samples`, in original units.
pub fn predict_restored<M: NeuralRegressor>(model: &M, samples: &[Sample], scale: TargetScale) -> Result<Vec<f64>> {
    samples.iter().map(|s| model.predict(&s.x).map(|y| scale.restore(y))).collect()
}

/// Relative error of `model` on `samples`, both sides restored to original units.
pub fn relative_error_on<M: NeuralRegressor>(model: &M, samples: &[Sample], scale: TargetScale) -> Result<f64> {
    let pred = predict_restored(model, samples, scale)?;
    let real: Vec<f64> = samples.iter().map(|s| scale.restore(s.y)).collect();
    relative_error(&pred, &real)
}

/// Runs one minibatch: forward, Huber gradient, backward, parameter update.
/// Returns the batch's mean Huber loss.
pub fn train_batch<M: NeuralRegressor>(
    model: &mut M,
    optimizer: &mut AdaDelta,
    batch: &[&Sample],
    grads: &mut [Matrix],
) -> Result<f64> {
    for g in grads.iter_mut() {
        g.fill(0.0);
    }
    let n = batch.len() as f64;
    let mut loss = 0.0;
    for s in batch {
        let (pred, trace) = model.forward_trace(&s.x)?;
        let diff = pred - s.y;
        loss += huber_term(diff);
        model.backward_into(&trace, diff.clamp(-1.0, 1.0) / n, grads)?;
    }
    let loss = loss / n;
    if loss.is_finite() {
        optimizer.step(&mut model.params_mut(), grads)?;
    }
    Ok(loss)
}

/// Minibatch AdaDelta training with best-epoch selection on `val`.
///
/// Each epoch reshuffles the training samples (seeded), walks them in
/// batches of `batch_size` (the last batch may be smaller), averages the
/// Huber gradient over each batch and takes one optimizer step per batch.
/// Validation targets are only read to score each epoch.
pub fn fit<M: NeuralRegressor>(
    model: M,
    train: &[Sample],
    val: &[Sample],
    scale: TargetScale,
    config: &TrainConfig,
) -> Result<FitReport<M>> {
    if train.is_empty() {
        return Err(Error::argument("training set is empty"));
    }
    if val.is_empty() {
        return Err(Error::argument("validation set is empty"));
    }
    if config.batch_size == 0 || config.batch_size > train.len() {
        return Err(Error::argument(format!(
            "batch size {} must be between 1 and the training-set size {}",
            config.batch_size,
            train.len()
        )));
    }
    if config.max_epochs == 0 {
        return Err(Error::argument("max_epochs must be at least 1"));
    }

    let mut model = model;
    let mut optimizer = AdaDelta::for_model(config.optimizer, &model)?;
    let mut grads = model.zero_grads();
    let mut rng = SeededRng::new(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(config.max_epochs);
    let mut best: Option<(f64, usize, M)> = None;

    for epoch in 1..=config.max_epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train[i]).collect();
            let loss = train_batch(&mut model, &mut optimizer, &batch, &mut grads)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, batch: b, detail: format!("loss became {loss}") });
            }
            loss_sum += loss * batch.len() as f64;
        }
        let train_huber = loss_sum / train.len() as f64;
        let val_rel_err = relative_error_on(&model, val, scale)?;
        if !val_rel_err.is_finite() {
            return Err(Error::Divergence {
                epoch,
                batch: train.len().div_ceil(config.batch_size),
                detail: format!("validation error became {val_rel_err}"),
            });
        }
        history.push(EpochRecord { epoch, train_huber, val_rel_err });

        let improved = best.as_ref().is_none_or(|(err, _, _)| val_rel_err < *err);
        if improved {
            best = Some((val_rel_err, epoch, model.clone()));
        }
        let best_epoch = best.as_ref().map_or(epoch, |(_, e, _)| *e);
        if epoch - best_epoch >= config.patience {
            break;
        }
    }

    let (_, best_epoch, best) = best.expect("at least one epoch ran");
    Ok(FitReport { best, best_epoch, last: model, history })
}

/// One line per epoch: `epoch, train_huber, val_rel_err`.
pub fn write_history<W: Write>(history: &[EpochRecord], mut out: W) -> Result<()> {
    writeln!(out, "epoch, train_huber, val_rel_err")?;
    for r in history {
        writeln!(out, "{}, {}, {}", r.epoch, r.train_huber, r.val_rel_err)?;
    }
    Ok(())
}
