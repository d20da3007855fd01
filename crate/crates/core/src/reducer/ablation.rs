use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::engine::{run_loop, CompressionPlan};
use crate::distill::{accuracy, DistillConfig, TrainData};
use crate::error::{Error, Result};
use crate::network::Network;

pub const DEFAULT_QUANTILE_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Median accuracy and reduction across seeds for one quantile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub quantile: f64,
    pub final_accuracy: f64,
    pub reduction_fraction: f64,
}

/// Middle value (mean of the two middle values for even lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// One [`run_loop`] per (quantile, seed) cell, each starting from
/// `net_factory(seed)`. Cells run in parallel; rows come back in grid order.
pub fn quantile_ablation<F>(
    net_factory: F,
    data: TrainData<'_>,
    quantile_grid: &[f64],
    plan: &CompressionPlan,
    cfg: &DistillConfig,
    seeds: &[u64],
) -> Result<Vec<AblationRow>>
where
    F: Fn(u64) -> Result<Network> + Sync,
{
    if quantile_grid.is_empty() {
        return Err(Error::invalid("quantile grid is empty"));
    }
    if seeds.is_empty() {
        return Err(Error::invalid("at least one seed is required"));
    }
    if let Some(q) = quantile_grid.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(Error::invalid(format!("quantile {q} outside [0, 1]")));
    }
    let cells: Vec<(usize, u64)> = (0..quantile_grid.len())
        .flat_map(|qi| seeds.iter().map(move |&s| (qi, s)))
        .collect();
    let results: Vec<(f64, f64)> = cells
        .par_iter()
        .map(|&(qi, seed)| {
            let net = net_factory(seed)?;
            let cell_plan = CompressionPlan {
                quantile: quantile_grid[qi],
                ..plan.clone()
            };
            let outcome = run_loop(net, data, &cell_plan, cfg, seed)?;
            let acc = accuracy(&outcome.network.logits(data.val.features())?, data.val.labels());
            Ok((acc, outcome.reduction()))
        })
        .collect::<Result<_>>()?;

    Ok(quantile_grid
        .iter()
        .enumerate()
        .map(|(qi, &quantile)| {
            let cell = &results[qi * seeds.len()..(qi + 1) * seeds.len()];
            let accs: Vec<f64> = cell.iter().map(|c| c.0).collect();
            let reds: Vec<f64> = cell.iter().map(|c| c.1).collect();
            AblationRow {
                quantile,
                final_accuracy: median(&accs),
                reduction_fraction: median(&reds),
            }
        })
        .collect())
}
