use serde::{Deserialize, Serialize};

use super::loss::ClassWeightTracker;
use super::network::Network;
use super::optim::{onecycle_lr, AdamW};
use crate::code::ToricCode;
use crate::equivariance::FlipTables;
use crate::error::{Error, Result};
use crate::noise::{draw_sample, stream_rng, NoiseModel};

/// RNG stream used for training data; stream 0 initializes the weights.
pub const TRAIN_STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub total_samples: usize,
    pub max_lr: f64,
    pub betas: (f32, f32),
    pub weight_decay: f32,
    pub eps: f32,
    pub seed: u64,
    /// Physical error rate of the training data.
    pub p_train: f64,
    /// Weight the loss by inverse class frequency.
    pub class_weighting: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 512,
            total_samples: 1_000_000,
            max_lr: 0.1,
            betas: (0.9, 0.999),
            weight_decay: 0.05,
            eps: 1e-8,
            seed: 0,
            p_train: 0.01,
            class_weighting: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.total_samples == 0 {
            return Err(Error::param("batch size and sample count must be positive"));
        }
        if self.batch_size > self.total_samples {
            return Err(Error::param(format!(
                "batch size {} exceeds the {} training samples",
                self.batch_size, self.total_samples
            )));
        }
        let positive = [self.max_lr, self.eps as f64];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.weight_decay < 0.0 {
            return Err(Error::param(
                "learning rate and eps must be positive, weight decay non-negative",
            ));
        }
        let (b1, b2) = self.betas;
        if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) {
            return Err(Error::param("betas must lie in [0, 1)"));
        }
        NoiseModel::new(self.p_train)?;
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.total_samples.div_ceil(self.batch_size)
    }
}

#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    /// Weighted loss of every optimizer step.
    pub loss_trace: Vec<f32>,
    /// Unweighted cross-entropy of every step. The class weights keep
    /// changing during a run, so this is the trace that stays comparable
    /// from start to end.
    pub ce_trace: Vec<f32>,
}

/// Trains `network` on freshly sampled errors for `code`. `on_step` sees the
/// step index and loss after every update.
pub fn train(
    network: &mut Network,
    code: &ToricCode,
    config: &TrainConfig,
    mut on_step: impl FnMut(usize, f32),
) -> Result<TrainReport> {
    config.validate()?;
    if network.dim() != code.dim() {
        return Err(Error::shape("network and code dimensions differ"));
    }
    let tables = FlipTables::build(code);
    let noise = NoiseModel::new(config.p_train)?;
    let mut rng = stream_rng(config.seed, TRAIN_STREAM);
    let mut tracker = ClassWeightTracker::new(network.n_classes());
    let mut opt = AdamW::new(config.betas, config.weight_decay, config.eps);
    let steps = config.steps();
    let mut report = TrainReport {
        loss_trace: Vec::with_capacity(steps),
        ce_trace: Vec::with_capacity(steps),
    };
    let mut remaining = config.total_samples;
    for step in 0..steps {
        let n = config.batch_size.min(remaining);
        remaining -= n;
        let (syndromes, labels): (Vec<_>, Vec<_>) = (0..n)
            .map(|_| {
                let s = draw_sample(code, &noise, &mut rng);
                (s.syndrome, s.label.index())
            })
            .unzip();
        let weights = if config.class_weighting {
            tracker.update(&labels)
        } else {
            vec![1.0; network.n_classes()]
        };
        let loss = network.train_batch(&syndromes, &labels, &weights, Some(&tables))?;
        let lr = onecycle_lr(step, steps, config.max_lr) as f32;
        let mut update = opt.begin();
        network.visit_params(&mut |_, p| update.update(p, lr));
        report.loss_trace.push(loss.weighted);
        report.ce_trace.push(loss.plain);
        on_step(step, loss.weighted);
    }
    Ok(report)
}
