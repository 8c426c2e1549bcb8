//! Shared minimisation driver for both architectures.

use serde::{Deserialize, Serialize};

use crate::divergence::DivergenceSpec;
use crate::error::{Error, Result};
use crate::nn::{DiscriminatorNet, Optimizer, OptimizerKind};
use crate::objectives::{
    cross_entropy_objective, supervised_objective, unsupervised_objective, JointBatch, ObjectiveEval,
    SupervisedBatch,
};
use crate::rng::{substream, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub lr: f64,
    /// Learning rate at the last step as a fraction of `lr`; the schedule
    /// decays geometrically in between. `1.0` keeps it constant.
    pub lr_final_fraction: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: OptimizerKind::Adam,
            lr: 1e-3,
            lr_final_fraction: 1.0,
            batch_size: 256,
            epochs: 20,
            steps_per_epoch: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be positive"));
        }
        if self.steps_per_epoch == 0 {
            return Err(Error::config("steps_per_epoch", "must be positive"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::config("lr", format!("must be positive, got {}", self.lr)));
        }
        if !(self.lr_final_fraction > 0.0 && self.lr_final_fraction <= 1.0) {
            return Err(Error::config("lr_final_fraction", "must be in (0, 1]"));
        }
        Ok(())
    }

    pub fn total_steps(&self) -> usize {
        self.epochs * self.steps_per_epoch
    }
}

/// What the supervised trainer minimises.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SupervisedLoss {
    Divergence(DivergenceSpec),
    /// Plain cross-entropy on a softmax network, for comparison runs.
    CrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        *self.epoch_losses.last().unwrap_or(&f64::NAN)
    }
}

/// Generic loop: draw a batch, evaluate, step. Batches come from
/// `sample(batch_size, rng)` with a dedicated data stream.
fn run<B>(
    net: &mut DiscriminatorNet,
    cfg: &TrainConfig,
    mut sample: impl FnMut(usize, &mut StreamRng) -> Result<B>,
    eval: impl Fn(&DiscriminatorNet, &B, Option<&mut StreamRng>) -> Result<ObjectiveEval>,
) -> Result<TrainReport> {
    cfg.validate()?;
    let mut opt = Optimizer::new(cfg.optimizer, cfg.lr)?;
    let mut data_rng = substream(cfg.seed, "train-data");
    let mut dropout_rng = substream(cfg.seed, "dropout");
    let use_dropout = net.dropout() > 0.0;
    let total = cfg.total_steps();
    let decay = cfg.lr_final_fraction.ln() / (total.max(2) - 1) as f64;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        let mut sum = 0.0;
        for _ in 0..cfg.steps_per_epoch {
            opt.set_learning_rate(cfg.lr * (decay * step as f64).exp());
            let batch = sample(cfg.batch_size, &mut data_rng)?;
            let out = eval(net, &batch, use_dropout.then_some(&mut dropout_rng))?;
            if !out.loss.is_finite() {
                return Err(Error::Training(format!("non-finite loss at epoch {epoch}")));
            }
            opt.step(net, &out.grads)?;
            if !net.all_finite() {
                return Err(Error::Training(format!("non-finite weights at epoch {epoch}")));
            }
            sum += out.loss;
            step += 1;
        }
        epoch_losses.push(sum / cfg.steps_per_epoch as f64);
    }
    Ok(TrainReport { epoch_losses, steps: step })
}

pub fn train_supervised(
    net: &mut DiscriminatorNet,
    loss: SupervisedLoss,
    cfg: &TrainConfig,
    sample: impl FnMut(usize, &mut StreamRng) -> Result<SupervisedBatch>,
) -> Result<TrainReport> {
    run(net, cfg, sample, |n, b, r| match &loss {
        SupervisedLoss::Divergence(spec) => supervised_objective(spec, n, b, r),
        SupervisedLoss::CrossEntropy => cross_entropy_objective(n, b, r),
    })
}

pub fn train_unsupervised(
    net: &mut DiscriminatorNet,
    spec: &DivergenceSpec,
    cfg: &TrainConfig,
    sample: impl FnMut(usize, &mut StreamRng) -> Result<JointBatch>,
) -> Result<TrainReport> {
    run(net, cfg, sample, |n, b, r| unsupervised_objective(spec, n, b, r))
}
