use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, SeededRng};

/// Fractions for a stratified train/validation split, plus the calibration
/// share drawn from the training split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub calibration_fraction_of_train: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, val_fraction: f64, seed: u64) -> Self {
        Self {
            train_fraction,
            val_fraction,
            calibration_fraction_of_train: 0.10,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let open = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be in (0, 1), got {v}")))
            }
        };
        open("train_fraction", self.train_fraction)?;
        open("val_fraction", self.val_fraction)?;
        open("calibration_fraction_of_train", self.calibration_fraction_of_train)?;
        if self.train_fraction + self.val_fraction > 1.0 + 1e-12 {
            return Err(Error::invalid("train_fraction + val_fraction exceeds 1"));
        }
        Ok(())
    }
}

/// Index sets (ascending) and the materialized subsets. Calibration indices
/// are a subset of the training indices.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub calibration: Dataset,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
    pub calibration_indices: Vec<usize>,
}

/// Largest-remainder apportionment of `round(Σ counts·fraction)` across
/// groups; each share is the floor or ceiling of its exact value.
fn apportion(counts: &[usize], fraction: f64) -> Vec<usize> {
    let exact: Vec<f64> = counts.iter().map(|&c| c as f64 * fraction).collect();
    let total = (exact.iter().sum::<f64>() + 1e-9).round() as usize;
    let mut shares: Vec<usize> = exact.iter().map(|e| (e + 1e-9).floor() as usize).collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - shares[a] as f64;
        let rb = exact[b] - shares[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut assigned: usize = shares.iter().sum();
    for &g in order.iter().cycle().take(counts.len() * 2) {
        if assigned >= total {
            break;
        }
        if shares[g] < counts[g] {
            shares[g] += 1;
            assigned += 1;
        }
    }
    shares
}

fn by_class(labels: &[usize], num_classes: usize) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        groups[l].push(i);
    }
    groups
}

/// Stratified split. Per-class counts in every part are within one example of
/// the exact proportional allocation. Deterministic in `spec.seed`.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<Splits> {
    spec.validate()?;
    let groups = by_class(ds.labels(), ds.num_classes());
    let counts: Vec<usize> = groups.iter().map(Vec::len).collect();
    let train_counts = apportion(&counts, spec.train_fraction);
    let val_counts = apportion(&counts, spec.val_fraction);
    for (c, &n) in counts.iter().enumerate() {
        if train_counts[c] == 0 || val_counts[c] == 0 || train_counts[c] + val_counts[c] > n {
            return Err(Error::invalid(format!(
                "class {c} has {n} examples, too few to stratify"
            )));
        }
    }

    let mut rng = SeededRng::derived(spec.seed, "split");
    let mut train_groups = Vec::with_capacity(groups.len());
    let mut val = Vec::new();
    for (c, group) in groups.iter().enumerate() {
        let mut members = group.clone();
        rng.shuffle(&mut members);
        train_groups.push(members[..train_counts[c]].to_vec());
        val.extend_from_slice(&members[train_counts[c]..train_counts[c] + val_counts[c]]);
    }
    let mut train: Vec<usize> = train_groups.iter().flatten().copied().collect();
    train.sort_unstable();
    val.sort_unstable();

    let calibration = sample_groups(
        &train_groups,
        spec.calibration_fraction_of_train,
        derive_seed(spec.seed, "calibration"),
    );

    Ok(Splits {
        train: ds.select(&train),
        val: ds.select(&val),
        calibration: ds.select(&calibration),
        train_indices: train,
        val_indices: val,
        calibration_indices: calibration,
    })
}

fn sample_groups(groups: &[Vec<usize>], fraction: f64, seed: u64) -> Vec<usize> {
    let counts: Vec<usize> = groups.iter().map(Vec::len).collect();
    let take = apportion(&counts, fraction);
    let mut rng = SeededRng::new(seed);
    let mut out = Vec::new();
    for (group, &k) in groups.iter().zip(&take) {
        let mut members = group.clone();
        members.sort_unstable();
        rng.shuffle(&mut members);
        out.extend_from_slice(&members[..k]);
    }
    out.sort_unstable();
    out
}

/// Stratified sample of `fraction` of `ds`, as ascending indices into `ds`.
pub fn stratified_subset(ds: &Dataset, fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("fraction must be in (0, 1], got {fraction}")));
    }
    let groups = by_class(ds.labels(), ds.num_classes());
    Ok(sample_groups(&groups, fraction, seed))
}
