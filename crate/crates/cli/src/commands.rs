use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rmtkd::data::{load_csv, planted_subspace_task, split, Dataset, SplitSpec, Splits};
use rmtkd::distill::{accuracy, train_until, write_training_log_csv, TrainData, TrainOutcome};
use rmtkd::network::{load_checkpoint, Checkpoint, Network};
use rmtkd::reducer::{
    quantile_ablation, run_loop, write_ablation_csv, write_history_csv, IterationRecord, StopReason,
};
use rmtkd::rng::{derive_seed, SeededRng};
use rmtkd::spectral::{analyze, write_histogram_csv, write_mp_model_json, write_spectrum_csv};
use serde::Serialize;

use crate::config::{parse_quantiles, RunConfig, TaskConfig};
use crate::error::CliError;
use crate::output::Staged;
use crate::{Args, Command};

/// A fully validated request.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    /// Config with the `--seed` override applied and relative paths resolved
    /// against the config file's directory.
    pub config: RunConfig,
    pub out: PathBuf,
    pub quantiles: Option<Vec<f64>>,
    pub layer: Option<usize>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl Invocation {
    pub fn from_args(args: Args) -> Result<Self, CliError> {
        let mut config = RunConfig::load(&args.config)?;
        let base = args
            .config
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        if let TaskConfig::Csv(t) = &mut config.task {
            t.path = resolve(&t.path);
        }
        config.checkpoint = config.checkpoint.as_deref().map(resolve);
        if let Some(seed) = args.seed {
            config.seed = seed;
        }
        let out = match (args.out, &config.output_dir) {
            (Some(o), _) => o,
            (None, Some(o)) => resolve(o),
            (None, None) => return Err(usage("output_dir: not set and no --out given")),
        };

        let quantiles = args.quantiles.as_deref().map(parse_quantiles).transpose()?;
        match args.command {
            Command::Ablate => {}
            Command::Spectrum => {
                if quantiles.as_ref().is_some_and(|q| q.len() != 1) {
                    return Err(usage("--quantiles: spectrum takes a single quantile"));
                }
            }
            _ if quantiles.is_some() => {
                return Err(usage("--quantiles: only valid for spectrum and ablate"))
            }
            _ => {}
        }
        match (args.command, args.layer) {
            (Command::Spectrum, None) => return Err(usage("--layer: required for spectrum")),
            (Command::Spectrum, _) | (_, None) => {}
            _ => return Err(usage("--layer: only valid for spectrum")),
        }
        Ok(Self {
            command: args.command,
            config,
            out,
            quantiles,
            layer: args.layer,
        })
    }
}

pub fn execute(inv: &Invocation) -> Result<Vec<PathBuf>, CliError> {
    let staged = match inv.command {
        Command::Train => train(&inv.config)?,
        Command::Spectrum => spectrum(inv)?,
        Command::Compress => compress(&inv.config)?,
        Command::Ablate => ablate(inv)?,
    };
    staged.commit(&inv.out)
}

fn load_splits(cfg: &RunConfig) -> Result<Splits, CliError> {
    let dataset: Dataset = match &cfg.task {
        TaskConfig::Synthetic(_) => {
            let spec = cfg.planted_spec().expect("synthetic task");
            planted_subspace_task(&spec)?.dataset
        }
        TaskConfig::Csv(t) => load_csv(&t.path, &t.schema())?,
    };
    let spec = SplitSpec {
        train_fraction: cfg.split.train_fraction,
        val_fraction: cfg.split.val_fraction,
        calibration_fraction_of_train: cfg.plan.calibration_fraction,
        seed: derive_seed(cfg.seed, "split"),
    };
    Ok(split(&dataset, &spec)?)
}

fn fresh_network(cfg: &RunConfig, splits: &Splits, seed: u64) -> Result<Network, CliError> {
    Ok(Network::mlp(
        splits.train.dim(),
        &cfg.network.hidden,
        splits.train.num_classes(),
        derive_seed(seed, "init"),
    )?)
}

fn warm_up(cfg: &RunConfig, splits: &Splits, seed: u64) -> Result<TrainOutcome, CliError> {
    let net = fresh_network(cfg, splits, seed)?;
    let data = TrainData {
        train: &splits.train,
        val: &splits.val,
    };
    Ok(train_until(net, data, &cfg.distill, None, derive_seed(seed, "train"))?)
}

fn val_accuracy(net: &Network, splits: &Splits) -> Result<f64, CliError> {
    Ok(accuracy(&net.logits(splits.val.features())?, splits.val.labels()))
}

/// Checkpoints carry the run seed's generator state and the validation
/// accuracy, so the same network in the same run always serializes to the
/// same bytes.
fn checkpoint_bytes(net: &Network, seed: u64, splits: &Splits) -> Result<Vec<u8>, CliError> {
    let metrics = BTreeMap::from([("val_accuracy".to_string(), val_accuracy(net, splits)?)]);
    Ok(Checkpoint::new(net.clone(), SeededRng::new(seed).state_bytes(), metrics).to_bytes())
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Runtime(format!("json encoding failed: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn csv_bytes(
    write: impl FnOnce(&mut Vec<u8>) -> rmtkd::Result<()>,
) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn train(cfg: &RunConfig) -> Result<Staged, CliError> {
    let splits = load_splits(cfg)?;
    let outcome = warm_up(cfg, &splits, cfg.seed)?;
    let mut staged = Staged::new();
    staged.add("model.rmtk", checkpoint_bytes(&outcome.network, cfg.seed, &splits)?);
    staged.add("train_log.csv", csv_bytes(|b| write_training_log_csv(&outcome.log, b))?);
    staged.add("network.json", json_bytes(&outcome.network.summary())?);
    Ok(staged)
}

fn spectrum(inv: &Invocation) -> Result<Staged, CliError> {
    let cfg = &inv.config;
    let layer = inv.layer.expect("checked when parsing");
    let splits = load_splits(cfg)?;
    let net = match &cfg.checkpoint {
        Some(path) => load_checkpoint(path)?.network,
        None => fresh_network(cfg, &splits, cfg.seed)?,
    };
    if !net.hidden_layer_ids().contains(&layer) {
        return Err(usage(format!(
            "--layer: {layer} is not a hidden layer (available: {:?})",
            net.hidden_layer_ids()
        )));
    }
    let quantile = inv.quantiles.as_ref().map_or(cfg.plan.quantile, |q| q[0]);
    let (_, trace) = net.forward(splits.calibration.features(), Some(layer))?;
    let trace = trace.expect("capture layer was requested");
    let analysis = analyze(&trace, quantile, cfg.plan.center_activations)?;

    let mut staged = Staged::new();
    staged.add("spectrum.csv", csv_bytes(|b| write_spectrum_csv(&analysis.spectrum, b))?);
    let histogram = match &analysis.fit {
        Some(fit) => csv_bytes(|b| write_histogram_csv(fit, b))?,
        None => b"bin_left,bin_right,empirical,model\n".to_vec(),
    };
    staged.add("histogram.csv", histogram);
    let mut mp = csv_bytes(|b| {
        write_mp_model_json(&analysis.model, Some(analysis.partition.k()), b)
    })?;
    mp.push(b'\n');
    staged.add("mp_model.json", mp);
    Ok(staged)
}

#[derive(Serialize)]
struct CompressSummary {
    seed: u64,
    baseline_accuracy: f64,
    final_accuracy: f64,
    accuracy_drop: f64,
    reduction_fraction: f64,
    initial_trainable: usize,
    final_trainable: usize,
    steps: usize,
    stop_reason: StopReason,
    rolled_back: Option<IterationRecord>,
}

fn compress(cfg: &RunConfig) -> Result<Staged, CliError> {
    let splits = load_splits(cfg)?;
    let warm = warm_up(cfg, &splits, cfg.seed)?;
    let baseline_accuracy = val_accuracy(&warm.network, &splits)?;
    let baseline_bytes = checkpoint_bytes(&warm.network, cfg.seed, &splits)?;
    let data = TrainData {
        train: &splits.train,
        val: &splits.val,
    };
    let outcome = run_loop(warm.network, data, &cfg.plan, &cfg.distill, cfg.seed)?;
    let final_accuracy = val_accuracy(&outcome.network, &splits)?;
    let summary = CompressSummary {
        seed: cfg.seed,
        baseline_accuracy,
        final_accuracy,
        accuracy_drop: baseline_accuracy - final_accuracy,
        reduction_fraction: outcome.reduction(),
        initial_trainable: outcome.initial_trainable,
        final_trainable: outcome.network.param_count().trainable,
        steps: outcome.history.len(),
        stop_reason: outcome.stop_reason,
        rolled_back: outcome.rolled_back,
    };

    let mut staged = Staged::new();
    staged.add("baseline.rmtk", baseline_bytes);
    staged.add("compressed.rmtk", checkpoint_bytes(&outcome.network, cfg.seed, &splits)?);
    staged.add("train_log.csv", csv_bytes(|b| write_training_log_csv(&warm.log, b))?);
    staged.add("history.csv", csv_bytes(|b| write_history_csv(&outcome.history, b))?);
    staged.add("summary.json", json_bytes(&summary)?);
    staged.add("network.json", json_bytes(&outcome.network.summary())?);
    staged.add("config.json", json_bytes(cfg)?);
    Ok(staged)
}

fn ablate(inv: &Invocation) -> Result<Staged, CliError> {
    let cfg = &inv.config;
    let grid = inv.quantiles.clone().unwrap_or_else(|| cfg.ablation.quantiles.clone());
    let seeds = if cfg.ablation.seeds.is_empty() {
        vec![cfg.seed]
    } else {
        cfg.ablation.seeds.clone()
    };
    let splits = load_splits(cfg)?;
    let data = TrainData {
        train: &splits.train,
        val: &splits.val,
    };
    let factory = |seed: u64| {
        warm_up(cfg, &splits, seed)
            .map(|o| o.network)
            .map_err(|e| rmtkd::Error::InvalidState(e.to_string()))
    };
    let rows = quantile_ablation(factory, data, &grid, &cfg.plan, &cfg.distill, &seeds)?;
    let mut staged = Staged::new();
    staged.add("ablation.csv", csv_bytes(|b| write_ablation_csv(&rows, b))?);
    Ok(staged)
}
