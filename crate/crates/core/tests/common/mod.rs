#![allow(dead_code)]

use rmtkd::data::{planted_subspace_task, split, PlantedTaskSpec, SplitSpec, Splits};
use rmtkd::distill::{train_until, DistillConfig, TrainData};
use rmtkd::network::Network;

pub fn planted_spec(seed: u64) -> PlantedTaskSpec {
    PlantedTaskSpec {
        input_dim: 32,
        intrinsic_dim: 8,
        num_classes: 10,
        samples: 5000,
        noise_sigma: 1.0,
        margin: 0.1,
        seed,
    }
}

pub fn planted_splits(seed: u64) -> Splits {
    let task = planted_subspace_task(&planted_spec(seed)).unwrap();
    split(&task.dataset, &SplitSpec::new(0.8, 0.2, seed)).unwrap()
}

/// Baseline `[64, 64]` MLP trained with the default schedule.
pub fn trained_baseline(splits: &Splits, seed: u64) -> Network {
    let data = TrainData {
        train: &splits.train,
        val: &splits.val,
    };
    let net = Network::mlp(32, &[64, 64], 10, seed).unwrap();
    train_until(net, data, &DistillConfig::default(), None, seed)
        .unwrap()
        .network
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
