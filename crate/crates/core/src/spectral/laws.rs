use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marchenko–Pastur noise model: variance σ² and aspect ratio q = d/n, with
/// the derived bulk edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpModel {
    pub sigma2: f64,
    pub q: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
}

impl MpModel {
    pub fn new(sigma2: f64, q: f64) -> Result<Self> {
        let (lambda_minus, lambda_plus) = mp_bulk_edges(sigma2, q)?;
        Ok(Self {
            sigma2,
            q,
            lambda_minus,
            lambda_plus,
        })
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

/// λ± = σ²(1 ± √q)².
pub fn mp_bulk_edges(sigma2: f64, q: f64) -> Result<(f64, f64)> {
    check_positive("sigma2", sigma2)?;
    check_positive("q", q)?;
    let r = q.sqrt();
    Ok((sigma2 * (1.0 - r).powi(2), sigma2 * (1.0 + r).powi(2)))
}

/// MP density; zero outside the bulk and at λ = 0.
pub fn mp_density(lambda: f64, model: &MpModel) -> f64 {
    if lambda <= 0.0 || lambda < model.lambda_minus || lambda > model.lambda_plus {
        return 0.0;
    }
    let radicand = (model.lambda_plus - lambda) * (lambda - model.lambda_minus);
    if radicand <= 0.0 {
        return 0.0;
    }
    radicand.sqrt() / (2.0 * PI * lambda * model.q * model.sigma2)
}

/// MP probability mass on `[a, b]`, i.e. the integral of [`mp_density`].
///
/// Integrates in θ with λ = m − r·cos θ over the bulk, which turns the edge
/// square roots into a smooth integrand.
pub fn mp_interval_mass(a: f64, b: f64, model: &MpModel) -> f64 {
    let lo = a.max(model.lambda_minus);
    let hi = b.min(model.lambda_plus);
    if hi <= lo {
        return 0.0;
    }
    let m = 0.5 * (model.lambda_plus + model.lambda_minus);
    let r = 0.5 * (model.lambda_plus - model.lambda_minus);
    let theta = |x: f64| ((m - x) / r).clamp(-1.0, 1.0).acos();
    let scale = r * r / (2.0 * PI * model.q * model.sigma2);
    let integrand = |t: f64| {
        let lambda = m - r * t.cos();
        if lambda <= 0.0 {
            // λ₋ = 0: sin²θ / (m(1 − cos θ)) → 2/m
            return scale * 2.0 / m;
        }
        scale * t.sin().powi(2) / lambda
    };
    let (t0, t1) = (theta(lo), theta(hi));
    const STEPS: usize = 64;
    let h = (t1 - t0) / STEPS as f64;
    let mut sum = integrand(t0) + integrand(t1);
    for i in 1..STEPS {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * integrand(t0 + i as f64 * h);
    }
    sum * h / 3.0
}

/// Semicircle density on [−2σ, 2σ].
pub fn wigner_semicircle_density(x: f64, sigma2: f64) -> f64 {
    let radicand = 4.0 * sigma2 - x * x;
    if radicand <= 0.0 {
        return 0.0;
    }
    radicand.sqrt() / (2.0 * PI * sigma2)
}

/// Spike strength above which an outlier detaches from the bulk: σ²(1 + √c).
pub fn bbp_threshold(sigma2: f64, c: f64) -> Result<f64> {
    check_positive("sigma2", sigma2)?;
    check_positive("c", c)?;
    Ok(sigma2 * (1.0 + c.sqrt()))
}
