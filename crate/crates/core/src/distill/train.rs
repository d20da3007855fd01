use std::io::Write;

use serde::{Deserialize, Serialize};

use super::loss::{accuracy, combined_loss, DEFAULT_EPSILON_PROB};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::{Backprop, Network, Sgd};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistillConfig {
    /// Weight of the cross-entropy term; `1 − alpha` weighs the KL term.
    pub alpha: f64,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Training stops at the first epoch whose validation accuracy reaches
    /// this value.
    pub accuracy_threshold: f64,
    pub epsilon_prob: f64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            lr: 0.05,
            momentum: 0.9,
            batch_size: 32,
            max_epochs: 40,
            accuracy_threshold: 0.99,
            epsilon_prob: DEFAULT_EPSILON_PROB,
        }
    }
}

impl DistillConfig {
    /// Returns the name of the first offending field in the error message.
    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, why: &str| Err(Error::invalid(format!("{field}: {why}")));
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail("alpha", "must be in [0, 1]");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return fail("lr", "must be a non-negative number");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return fail("momentum", "must be in [0, 1)");
        }
        if self.batch_size == 0 {
            return fail("batch_size", "must be at least 1");
        }
        if self.max_epochs == 0 {
            return fail("max_epochs", "must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.accuracy_threshold) {
            return fail("accuracy_threshold", "must be in [0, 1]");
        }
        if !(self.epsilon_prob > 0.0 && self.epsilon_prob < 1.0) {
            return fail("epsilon_prob", "must be in (0, 1)");
        }
        Ok(())
    }
}

/// Frozen copy of a network used as the distillation teacher.
#[derive(Debug, Clone)]
pub struct TeacherSnapshot {
    network: Network,
    created_at_iteration: usize,
}

impl TeacherSnapshot {
    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn created_at_iteration(&self) -> usize {
        self.created_at_iteration
    }
}

pub fn snapshot_teacher(net: &Network, iteration: usize) -> TeacherSnapshot {
    TeacherSnapshot {
        network: net.clone(),
        created_at_iteration: iteration,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub train: &'a Dataset,
    pub val: &'a Dataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub ce_term: f64,
    pub kl_term: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights from the epoch with the best validation accuracy.
    pub network: Network,
    pub epochs_used: usize,
    pub val_accuracy: f64,
    pub log: Vec<EpochLog>,
}

/// Minibatch momentum-SGD training on `α·CE + (1 − α)·KL(teacher ‖ student)`.
///
/// Without a teacher the loss is pure cross-entropy. The shuffle order comes
/// from `seed`. Stops at the first epoch whose validation accuracy reaches
/// `cfg.accuracy_threshold` or after `cfg.max_epochs`, and returns the weights
/// of the best validation epoch (earliest on ties).
pub fn train_until(
    net: Network,
    data: TrainData<'_>,
    cfg: &DistillConfig,
    teacher: Option<&TeacherSnapshot>,
    seed: u64,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.train.is_empty() || data.val.is_empty() {
        return Err(Error::invalid("training and validation sets must be non-empty"));
    }
    if data.train.dim() != net.input_dim() || data.val.dim() != net.input_dim() {
        return Err(Error::invalid("dataset dimension does not match network input"));
    }

    let teacher_logits = teacher
        .map(|t| t.network.logits(data.train.features()))
        .transpose()?;
    let mut rng = SeededRng::new(seed);
    let mut optimizer = Sgd::new(cfg.lr, cfg.momentum)?;
    let mut backprop = Backprop::new();
    let mut net = net;
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut best: Option<(f64, Network)> = None;
    let mut log = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        rng.shuffle(&mut order);
        let (mut loss_sum, mut ce_sum, mut kl_sum) = (0.0, 0.0, 0.0);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = data.train.features().select_columns(chunk.iter());
            let labels: Vec<usize> = chunk.iter().map(|&i| data.train.labels()[i]).collect();
            let teacher_batch = teacher_logits.as_ref().map(|t| t.select_columns(chunk.iter()));
            let logits = backprop.forward(&net, &batch)?;
            let out = combined_loss(&logits, teacher_batch.as_ref(), &labels, cfg.alpha, cfg.epsilon_prob)?;
            let grads = backprop.backward(&net, &out.grad)?;
            optimizer.step(&mut net, &grads)?;
            let w = chunk.len() as f64;
            loss_sum += out.loss * w;
            ce_sum += out.ce * w;
            kl_sum += out.kl * w;
        }
        let n = data.train.len() as f64;
        let val_accuracy = accuracy(&net.logits(data.val.features())?, data.val.labels());
        if !loss_sum.is_finite() {
            return Err(Error::NumericalFailure(format!("training loss diverged in epoch {epoch}")));
        }
        log.push(EpochLog {
            epoch,
            train_loss: loss_sum / n,
            ce_term: ce_sum / n,
            kl_term: kl_sum / n,
            val_accuracy,
        });
        if best.as_ref().is_none_or(|(acc, _)| val_accuracy > *acc) {
            best = Some((val_accuracy, net.clone()));
        }
        if val_accuracy >= cfg.accuracy_threshold {
            break;
        }
    }

    let (val_accuracy, network) = best.expect("at least one epoch runs");
    Ok(TrainOutcome {
        network,
        epochs_used: log.len(),
        val_accuracy,
        log,
    })
}

/// `epoch,train_loss,ce_term,kl_term,val_accuracy`.
pub fn write_training_log_csv<W: Write>(log: &[EpochLog], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in log {
        w.serialize(row)
            .map_err(|e| Error::InvalidState(format!("csv write failed: {e}")))?;
    }
    if log.is_empty() {
        w.write_record(["epoch", "train_loss", "ce_term", "kl_term", "val_accuracy"])
            .map_err(|e| Error::InvalidState(format!("csv write failed: {e}")))?;
    }
    w.flush().map_err(|e| Error::InvalidState(e.to_string()))
}
