use serde::{Deserialize, Serialize};

use super::projection::{apply_projection, build_projection};
use crate::data::stratified_subset;
use crate::distill::{accuracy, snapshot_teacher, train_until, DistillConfig, TrainData};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::rng::derive_seed;
use crate::spectral::{analyze, DEFAULT_QUANTILE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompressionPlan {
    /// Trainable layer ids to reduce, in order. Empty means every hidden
    /// layer, shallow to deep.
    pub layer_order: Vec<usize>,
    /// Eigenvalue quantile that seeds the σ² fit.
    pub quantile: f64,
    pub min_k: usize,
    /// A fine-tuned step whose validation accuracy lands below this is rolled
    /// back and ends the loop.
    pub accuracy_floor: f64,
    pub max_iterations: usize,
    /// Fraction of the initial trainable parameters to remove before stopping.
    pub target_reduction: f64,
    /// Share of the training split sampled (stratified) for calibration.
    pub calibration_fraction: f64,
    /// Subtract feature means before forming the covariance.
    pub center_activations: bool,
}

impl Default for CompressionPlan {
    fn default() -> Self {
        Self {
            layer_order: Vec::new(),
            quantile: DEFAULT_QUANTILE,
            min_k: 1,
            accuracy_floor: 0.0,
            max_iterations: 16,
            target_reduction: 1.0,
            calibration_fraction: 0.10,
            center_activations: false,
        }
    }
}

impl CompressionPlan {
    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, why: &str| Err(Error::invalid(format!("{field}: {why}")));
        if !(0.0..=1.0).contains(&self.quantile) {
            return fail("quantile", "must be in [0, 1]");
        }
        if self.min_k == 0 {
            return fail("min_k", "must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.accuracy_floor) {
            return fail("accuracy_floor", "must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.target_reduction) {
            return fail("target_reduction", "must be in [0, 1]");
        }
        if !(self.calibration_fraction > 0.0 && self.calibration_fraction <= 1.0) {
            return fail("calibration_fraction", "must be in (0, 1]");
        }
        Ok(())
    }

    /// Checks `layer_order` against a concrete network.
    pub fn validate_for(&self, net: &Network) -> Result<()> {
        self.validate()?;
        let hidden = net.hidden_layer_ids();
        for (i, id) in self.layer_order.iter().enumerate() {
            if !hidden.contains(id) {
                return Err(Error::invalid(format!(
                    "layer_order: {id} is not a hidden trainable layer"
                )));
            }
            if self.layer_order[..i].contains(id) {
                return Err(Error::invalid(format!("layer_order: {id} listed twice")));
            }
        }
        Ok(())
    }

    pub fn resolved_order(&self, net: &Network) -> Vec<usize> {
        if self.layer_order.is_empty() {
            net.hidden_layer_ids()
        } else {
            self.layer_order.clone()
        }
    }
}

/// Audit row for one compression step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub layer_id: usize,
    pub d: usize,
    pub k: usize,
    pub sigma2: f64,
    pub lambda_plus: f64,
    pub acc_before: f64,
    #[serde(rename = "acc_after")]
    pub acc_after_finetune: f64,
    pub params_before: usize,
    pub params_after: usize,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub network: Network,
    pub record: IterationRecord,
    /// No spikes were found; the network is returned unchanged.
    pub skipped: bool,
}

/// One full cycle on trainable layer `layer_id`: snapshot the teacher,
/// capture activations on a fresh stratified calibration sample, fit the MP
/// bulk, project onto the spikes, and fine-tune with self-distillation.
///
/// `net` is never modified; on error the caller keeps it as is.
pub fn compress_step(
    net: &Network,
    data: TrainData<'_>,
    plan: &CompressionPlan,
    cfg: &DistillConfig,
    layer_id: usize,
    iteration: usize,
    seed: u64,
) -> Result<StepOutcome> {
    let acc_before = accuracy(&net.logits(data.val.features())?, data.val.labels());
    let params_before = net.param_count().trainable;
    let teacher = snapshot_teacher(net, iteration);

    let cal_idx = stratified_subset(
        data.train,
        plan.calibration_fraction,
        derive_seed(seed, &format!("calibration/{iteration}")),
    )?;
    let calibration = data.train.select(&cal_idx);
    let (_, trace) = net.forward(calibration.features(), Some(layer_id))?;
    let trace = trace.expect("capture layer requested");
    let d = trace.d();
    let analysis = analyze(&trace, plan.quantile, plan.center_activations)?;

    let mut record = IterationRecord {
        iteration,
        layer_id,
        d,
        k: d,
        sigma2: analysis.model.sigma2,
        lambda_plus: analysis.model.lambda_plus,
        acc_before,
        acc_after_finetune: acc_before,
        params_before,
        params_after: params_before,
    };

    let projection = match build_projection(
        &analysis.partition,
        &analysis.spectrum,
        &analysis.eigenvectors,
        layer_id,
        plan.min_k,
    ) {
        Ok(p) => p,
        Err(Error::NoSpikes { .. }) => {
            return Ok(StepOutcome {
                network: net.clone(),
                record,
                skipped: true,
            })
        }
        Err(e) => return Err(e),
    };
    let reduced = apply_projection(net, &projection)?;
    let tuned = train_until(
        reduced,
        data,
        cfg,
        Some(&teacher),
        derive_seed(seed, &format!("finetune/{iteration}")),
    )?;

    record.k = projection.k();
    record.acc_after_finetune = tuned.val_accuracy;
    record.params_after = tuned.network.param_count().trainable;
    Ok(StepOutcome {
        network: tuned.network,
        record,
        skipped: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TargetReached,
    AccuracyFloor,
    MaxIterations,
    LayersExhausted,
}

#[derive(Debug, Clone)]
pub struct LoopOutcome {
    pub network: Network,
    /// Accepted steps (including no-spike skips).
    pub history: Vec<IterationRecord>,
    pub stop_reason: StopReason,
    /// The step that breached the accuracy floor and was undone.
    pub rolled_back: Option<IterationRecord>,
    pub initial_trainable: usize,
}

impl LoopOutcome {
    /// `1 − trainable_now / trainable_initial`.
    pub fn reduction(&self) -> f64 {
        reduction(self.initial_trainable, self.network.param_count().trainable)
    }
}

fn reduction(initial: usize, now: usize) -> f64 {
    1.0 - now as f64 / initial as f64
}

/// Apply [`compress_step`] to each layer of the plan in order until the
/// reduction target is met, a step breaches the accuracy floor (that step is
/// undone), `max_iterations` steps have run, or the layers run out.
pub fn run_loop(
    net: Network,
    data: TrainData<'_>,
    plan: &CompressionPlan,
    cfg: &DistillConfig,
    seed: u64,
) -> Result<LoopOutcome> {
    plan.validate_for(&net)?;
    cfg.validate()?;
    let initial_trainable = net.param_count().trainable;
    let mut net = net;
    let mut history = Vec::new();
    let mut stop_reason = StopReason::LayersExhausted;
    let mut rolled_back = None;

    for (iteration, layer_id) in plan.resolved_order(&net).into_iter().enumerate() {
        if reduction(initial_trainable, net.param_count().trainable) >= plan.target_reduction {
            stop_reason = StopReason::TargetReached;
            break;
        }
        if iteration >= plan.max_iterations {
            stop_reason = StopReason::MaxIterations;
            break;
        }
        let step = compress_step(&net, data, plan, cfg, layer_id, iteration, seed)?;
        if !step.skipped && step.record.acc_after_finetune < plan.accuracy_floor {
            rolled_back = Some(step.record);
            stop_reason = StopReason::AccuracyFloor;
            break;
        }
        net = step.network;
        history.push(step.record);
    }
    if stop_reason == StopReason::LayersExhausted
        && reduction(initial_trainable, net.param_count().trainable) >= plan.target_reduction
    {
        stop_reason = StopReason::TargetReached;
    }
    Ok(LoopOutcome {
        network: net,
        history,
        stop_reason,
        rolled_back,
        initial_trainable,
    })
}
