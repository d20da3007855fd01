use nalgebra::{DMatrix, DVector};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

const ORTHONORMAL_TOL: f64 = 1e-8;

/// `d × n` matrix of iid N(0, σ²) entries, filled one column (sample) at a
/// time.
pub fn sample_noise_matrix(d: usize, n: usize, sigma2: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = SeededRng::new(seed);
    let sigma = sigma2.sqrt();
    DMatrix::from_fn(d, n, |_, _| sigma * rng.gaussian())
}

/// One rank-one signal term `θ·v·vᵀ` of a spiked covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Spike {
    pub strength: f64,
    pub direction: Option<DVector<f64>>,
}

impl Spike {
    pub fn new(strength: f64) -> Self {
        Self {
            strength,
            direction: None,
        }
    }

    pub fn along(strength: f64, direction: DVector<f64>) -> Self {
        Self {
            strength,
            direction: Some(direction),
        }
    }
}

/// Extend `existing` (orthonormal columns, possibly empty) with `count` new
/// orthonormal columns drawn from Gaussian vectors by Gram–Schmidt with one
/// re-orthogonalization pass.
pub fn orthonormal_columns(
    dim: usize,
    count: usize,
    rng: &mut SeededRng,
    existing: &[DVector<f64>],
) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = existing.to_vec();
    let mut fresh = Vec::with_capacity(count);
    while fresh.len() < count {
        let mut v = DVector::from_fn(dim, |_, _| rng.gaussian());
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm < 1e-6 {
            continue;
        }
        v /= norm;
        basis.push(v.clone());
        fresh.push(v);
    }
    fresh
}

/// Columns drawn iid from `N(0, σ²I + Σ θⱼ vⱼvⱼᵀ)`.
///
/// Directions that are not supplied are sampled orthonormal to all others.
/// Returns the samples and the planted directions in the order of `spikes`.
pub fn sample_spiked(
    d: usize,
    n: usize,
    sigma2: f64,
    spikes: &[Spike],
    seed: u64,
) -> Result<(DMatrix<f64>, Vec<DVector<f64>>)> {
    if sigma2.is_nan() || sigma2 <= 0.0 {
        return Err(Error::invalid("sigma2 must be positive"));
    }
    let given: Vec<&DVector<f64>> = spikes.iter().filter_map(|s| s.direction.as_ref()).collect();
    for (i, v) in given.iter().enumerate() {
        if v.len() != d {
            return Err(Error::invalid(format!("spike direction has length {}, expected {d}", v.len())));
        }
        for (j, w) in given.iter().enumerate().skip(i) {
            let expected = if i == j { 1.0 } else { 0.0 };
            if (v.dot(w) - expected).abs() > ORTHONORMAL_TOL {
                return Err(Error::invalid("supplied spike directions are not orthonormal"));
            }
        }
    }
    if spikes.iter().any(|s| !(s.strength >= 0.0 && s.strength.is_finite())) {
        return Err(Error::invalid("spike strengths must be finite and non-negative"));
    }

    let mut rng = SeededRng::new(seed);
    let given_owned: Vec<DVector<f64>> = given.into_iter().cloned().collect();
    let missing = spikes.iter().filter(|s| s.direction.is_none()).count();
    let mut sampled = orthonormal_columns(d, missing, &mut rng, &given_owned).into_iter();
    let directions: Vec<DVector<f64>> = spikes
        .iter()
        .map(|s| match &s.direction {
            Some(v) => v.clone(),
            None => sampled.next().expect("one sampled direction per missing spike"),
        })
        .collect();

    let sigma = sigma2.sqrt();
    let amplitudes: Vec<f64> = spikes.iter().map(|s| s.strength.sqrt()).collect();
    let mut x = DMatrix::zeros(d, n);
    for mut col in x.column_iter_mut() {
        for v in col.iter_mut() {
            *v = sigma * rng.gaussian();
        }
        for (dir, amp) in directions.iter().zip(&amplitudes) {
            let xi = rng.gaussian();
            col.axpy(amp * xi, dir, 1.0);
        }
    }
    Ok((x, directions))
}

/// Parameters of the planted-subspace classification task.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedTaskSpec {
    pub input_dim: usize,
    pub intrinsic_dim: usize,
    pub num_classes: usize,
    pub samples: usize,
    /// Standard deviation of the nuisance directions.
    pub noise_sigma: f64,
    /// Minimum gap between the winning and runner-up class scores; samples
    /// closer to a decision boundary are redrawn.
    pub margin: f64,
    pub seed: u64,
}

/// A generated task together with the ground truth that produced it.
#[derive(Debug, Clone)]
pub struct PlantedTask {
    pub dataset: Dataset,
    /// `input_dim × intrinsic_dim`, orthonormal columns.
    pub planted_basis: DMatrix<f64>,
    /// `num_classes × intrinsic_dim`, unit rows; label = argmax of
    /// `classifier · basisᵀ · x`.
    pub classifier: DMatrix<f64>,
}

impl PlantedTask {
    /// Label predicted by the planted ground truth.
    pub fn oracle_label(&self, x: &DVector<f64>) -> usize {
        let z = self.planted_basis.transpose() * x;
        let scores = &self.classifier * z;
        scores.argmax().0
    }
}

/// Inputs are `B·z + ε` with `z ~ N(0, I_r)` in the planted subspace `B` and
/// nuisance noise `ε` of scale `noise_sigma` orthogonal to it. Labels come
/// from a random linear classifier on `z`. Class counts are balanced to within
/// one by rejection; more than `10·N` draws is a [`Error::GenerationFailure`].
pub fn planted_subspace_task(spec: &PlantedTaskSpec) -> Result<PlantedTask> {
    let PlantedTaskSpec {
        input_dim,
        intrinsic_dim,
        num_classes,
        samples,
        noise_sigma,
        margin,
        seed,
    } = *spec;
    if intrinsic_dim == 0 || intrinsic_dim > input_dim {
        return Err(Error::invalid(format!(
            "intrinsic_dim must be in 1..={input_dim}, got {intrinsic_dim}"
        )));
    }
    if num_classes < 2 {
        return Err(Error::invalid("num_classes must be at least 2"));
    }
    if samples < num_classes {
        return Err(Error::invalid("need at least one sample per class"));
    }
    if noise_sigma.is_nan() || noise_sigma < 0.0 || margin.is_nan() || margin < 0.0 {
        return Err(Error::invalid("noise_sigma and margin must be non-negative"));
    }

    let mut rng = SeededRng::new(seed);
    let basis_cols = orthonormal_columns(input_dim, intrinsic_dim, &mut rng, &[]);
    let basis = DMatrix::from_columns(&basis_cols);
    let mut classifier = DMatrix::from_fn(num_classes, intrinsic_dim, |_, _| rng.gaussian());
    for mut row in classifier.row_iter_mut() {
        let norm = row.norm();
        row /= norm;
    }

    let mut quota: Vec<usize> = (0..num_classes)
        .map(|c| samples / num_classes + usize::from(c < samples % num_classes))
        .collect();
    let mut features = DMatrix::zeros(input_dim, samples);
    let mut labels = Vec::with_capacity(samples);
    let max_draws = 10 * samples;
    let mut draws = 0;
    while labels.len() < samples {
        if draws >= max_draws {
            return Err(Error::GenerationFailure(format!(
                "could not balance {num_classes} classes within {max_draws} draws"
            )));
        }
        draws += 1;
        let z = DVector::from_fn(intrinsic_dim, |_, _| rng.gaussian());
        let mut x = &basis * &z;
        if intrinsic_dim < input_dim {
            let g = DVector::from_fn(input_dim, |_, _| rng.gaussian());
            let nuisance = &g - &basis * (basis.transpose() * &g);
            x.axpy(noise_sigma, &nuisance, 1.0);
        }
        let scores = &classifier * &z;
        let (label, top) = scores.argmax();
        let runner_up = scores
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != label)
            .map(|(_, &s)| s)
            .fold(f64::NEG_INFINITY, f64::max);
        if top - runner_up < margin || quota[label] == 0 {
            continue;
        }
        quota[label] -= 1;
        features.set_column(labels.len(), &x);
        labels.push(label);
    }
    Ok(PlantedTask {
        dataset: Dataset::new(features, labels, num_classes)?,
        planted_basis: basis,
        classifier,
    })
}
