use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Probability floor applied to the student distribution inside the KL log.
pub const DEFAULT_EPSILON_PROB: f64 = 1e-12;

const NORMALIZATION_TOL: f64 = 1e-9;

pub fn log_softmax(logits: &DVector<f64>) -> DVector<f64> {
    let max = logits.max();
    let log_sum = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    logits.map(|z| z - log_sum)
}

pub fn softmax(logits: &DVector<f64>) -> DVector<f64> {
    log_softmax(logits).map(f64::exp)
}

/// `KL(p_old ‖ p_new) = Σ p_old(i)·ln(p_old(i) / p_new(i))`.
///
/// `p_new` is floored at `epsilon_prob` before the log; terms with
/// `p_old(i) = 0` contribute nothing.
pub fn kl_divergence(p_old: &[f64], p_new: &[f64], epsilon_prob: f64) -> Result<f64> {
    if p_old.len() != p_new.len() {
        return Err(Error::invalid(format!(
            "distribution lengths differ: {} vs {}",
            p_old.len(),
            p_new.len()
        )));
    }
    if p_old.len() < 2 {
        return Err(Error::invalid("distributions need at least two entries"));
    }
    for (name, p) in [("p_old", p_old), ("p_new", p_new)] {
        if p.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::invalid(format!("{name} has negative or non-finite entries")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::invalid(format!("{name} sums to {total}, not 1")));
        }
    }
    Ok(p_old
        .iter()
        .zip(p_new)
        .filter(|(&po, _)| po > 0.0)
        .map(|(&po, &pn)| po * (po.ln() - pn.max(epsilon_prob).ln()))
        .sum())
}

/// Batch-mean loss, its two terms, and the gradient at the student logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub ce: f64,
    pub kl: f64,
    pub grad: DMatrix<f64>,
}

fn check_shapes(logits: &DMatrix<f64>, labels: &[usize]) -> Result<()> {
    if logits.ncols() != labels.len() {
        return Err(Error::invalid(format!(
            "{} logit columns but {} labels",
            logits.ncols(),
            labels.len()
        )));
    }
    if logits.ncols() == 0 {
        return Err(Error::invalid("empty batch"));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= logits.nrows()) {
        return Err(Error::invalid(format!("label {l} out of range")));
    }
    Ok(())
}

/// `L = α·CE(labels, softmax(new)) + (1 − α)·KL(softmax(old) ‖ softmax(new))`
/// averaged over the batch. The teacher logits receive no gradient. Without
/// teacher logits the loss is pure cross-entropy regardless of `alpha`.
pub fn combined_loss(
    logits_new: &DMatrix<f64>,
    logits_old: Option<&DMatrix<f64>>,
    labels: &[usize],
    alpha: f64,
    epsilon_prob: f64,
) -> Result<LossOutput> {
    check_shapes(logits_new, labels)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must be in [0, 1], got {alpha}")));
    }
    if let Some(old) = logits_old {
        if old.shape() != logits_new.shape() {
            return Err(Error::invalid("teacher and student logits differ in shape"));
        }
    }
    let alpha = if logits_old.is_some() { alpha } else { 1.0 };
    let batch = labels.len() as f64;
    let log_floor = epsilon_prob.ln();

    let mut grad = DMatrix::zeros(logits_new.nrows(), logits_new.ncols());
    let mut ce_total = 0.0;
    let mut kl_total = 0.0;
    for (j, &label) in labels.iter().enumerate() {
        let z = logits_new.column(j).into_owned();
        let log_p = log_softmax(&z);
        let p = log_p.map(f64::exp);
        ce_total -= log_p[label];

        let mut g = p.clone() * alpha;
        g[label] -= alpha;

        if let Some(old) = logits_old {
            let log_p_old = log_softmax(&old.column(j).into_owned());
            // d/dz of −Σ p_old·max(log p, log ε): unclamped entries only
            let mut active_mass = 0.0;
            let mut active_old = DVector::zeros(p.len());
            for i in 0..p.len() {
                let po = log_p_old[i].exp();
                if po == 0.0 {
                    continue;
                }
                if log_p[i] >= log_floor {
                    kl_total += po * (log_p_old[i] - log_p[i]);
                    active_old[i] = po;
                    active_mass += po;
                } else {
                    kl_total += po * (log_p_old[i] - log_floor);
                }
            }
            g += (p * active_mass - active_old) * (1.0 - alpha);
        }
        grad.set_column(j, &(g / batch));
    }
    let ce = ce_total / batch;
    let kl = kl_total / batch;
    Ok(LossOutput {
        loss: alpha * ce + (1.0 - alpha) * kl,
        ce,
        kl,
        grad,
    })
}

/// Batch-mean cross-entropy and its logit gradient.
pub fn cross_entropy(logits: &DMatrix<f64>, labels: &[usize]) -> Result<LossOutput> {
    combined_loss(logits, None, labels, 1.0, DEFAULT_EPSILON_PROB)
}

/// Fraction of columns whose argmax equals the label.
pub fn accuracy(logits: &DMatrix<f64>, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = logits
        .column_iter()
        .zip(labels)
        .filter(|(c, &l)| c.argmax().0 == l)
        .count();
    hits as f64 / labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn kl_of_identical_is_zero() {
        assert_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7], 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn kl_single_term() {
        let v = kl_divergence(&[1.0, 0.0], &[0.5, 0.5], 1e-12).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn kl_matches_direct_sum() {
        let mut rng = SeededRng::new(5);
        let mut draw = || {
            let raw: Vec<f64> = (0..10).map(|_| rng.uniform() + 0.01).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect::<Vec<f64>>()
        };
        let p = draw();
        let q = draw();
        let mut expected = 0.0;
        for i in 0..10 {
            expected += p[i] * (p[i] / q[i]).ln();
        }
        let got = kl_divergence(&p, &q, 1e-12).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn kl_floors_zero_student_mass() {
        let v = kl_divergence(&[0.5, 0.5], &[1.0, 0.0], 1e-12).unwrap();
        let expected = 0.5 * 0.5f64.ln() + 0.5 * (0.5f64.ln() - 1e-12f64.ln());
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn kl_input_checks() {
        assert!(kl_divergence(&[0.5, 0.5], &[1.0], 1e-12).is_err());
        assert!(kl_divergence(&[0.5, 0.6], &[0.5, 0.5], 1e-12).is_err());
        assert!(kl_divergence(&[1.0], &[1.0], 1e-12).is_err());
    }

    #[test]
    fn alpha_one_is_cross_entropy() {
        let new = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, -1.0, 2.0, 0.5, 0.5]);
        let old = DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        let labels = [0, 2];
        let mixed = combined_loss(&new, Some(&old), &labels, 1.0, 1e-12).unwrap();
        let ce = cross_entropy(&new, &labels).unwrap();
        assert_eq!(mixed.loss, ce.loss);
        assert_eq!(mixed.grad, ce.grad);
    }

    #[test]
    fn alpha_zero_identical_logits_is_zero() {
        let z = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, -1.0, 2.0, 0.5, 0.5]);
        let out = combined_loss(&z, Some(&z), &[0, 1], 0.0, 1e-12).unwrap();
        assert_eq!(out.loss, 0.0);
        assert!(out.grad.amax() < 1e-15);
    }

    #[test]
    fn two_class_hand_example() {
        // p_new = softmax([1, 0]) = [e/(e+1), 1/(e+1)], p_old = [½, ½], label 0
        let new = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let old = DMatrix::from_column_slice(2, 1, &[0.0, 0.0]);
        let e = std::f64::consts::E;
        let p0 = e / (e + 1.0);
        let p1 = 1.0 / (e + 1.0);
        let ce = -p0.ln();
        let kl = 0.5 * (0.5 / p0).ln() + 0.5 * (0.5 / p1).ln();
        let out = combined_loss(&new, Some(&old), &[0], 0.5, 1e-12).unwrap();
        assert!((out.loss - (0.5 * ce + 0.5 * kl)).abs() < 1e-15);
        assert!((out.ce - 0.313261687518).abs() < 1e-12);
    }

    #[test]
    fn one_hot_prediction_has_zero_gradient() {
        let new = DMatrix::from_column_slice(2, 1, &[800.0, 0.0]);
        let out = cross_entropy(&new, &[0]).unwrap();
        assert_eq!(out.grad.amax(), 0.0);
    }

    #[test]
    fn shape_mismatch() {
        let z = DMatrix::zeros(3, 2);
        assert!(combined_loss(&z, None, &[0], 0.5, 1e-12).is_err());
        assert!(combined_loss(&z, Some(&DMatrix::zeros(3, 3)), &[0, 1], 0.5, 1e-12).is_err());
    }
}
