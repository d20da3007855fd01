use super::eigen::Spectrum;
use super::laws::{mp_interval_mass, MpModel};
use crate::error::{Error, Result};

/// Quantile of the eigenvalue list used to seed σ² when none is configured.
pub const DEFAULT_QUANTILE: f64 = 0.5;

/// Ratio between the ends of the σ² search window and its centre.
const SEARCH_SPAN: f64 = 4.0;
/// Log-spaced candidates across the search window.
const GRID_POINTS: usize = 64;
const GOLDEN_REL_TOL: f64 = 1e-4;
/// Histogram upper edge as a multiple of the largest eigenvalue.
const RANGE_PAD: f64 = 1.05;

/// Empirical eigenvalue histogram against the MP density averaged over each bin.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramFit {
    pub bin_edges: Vec<f64>,
    pub empirical_density: Vec<f64>,
    pub model_density: Vec<f64>,
    pub l2_distance: f64,
}

/// Order statistic of the (clamped) eigenvalues at `quantile`, linearly
/// interpolated. Quantile 0.5 is the median.
pub fn init_sigma2(spectrum: &Spectrum, quantile: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&quantile) {
        return Err(Error::invalid(format!("quantile must be in [0, 1], got {quantile}")));
    }
    let mut ascending = spectrum.clamped();
    ascending.reverse();
    Ok(linear_quantile(&ascending, quantile))
}

fn linear_quantile(ascending: &[f64], quantile: f64) -> f64 {
    let pos = quantile * (ascending.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    ascending[lo] + frac * (ascending[hi] - ascending[lo])
}

/// `⌈√d⌉` equal-width bins over `[0, 1.05·λ_max]` and the empirical density
/// in each. Fails with [`Error::DegenerateSpectrum`] when every eigenvalue is
/// the same.
pub fn histogram_bins(spectrum: &Spectrum) -> Result<(Vec<f64>, Vec<f64>)> {
    let values = spectrum.clamped();
    let max = values[0];
    let min = values[values.len() - 1];
    if max <= 0.0 || max == min {
        return Err(Error::DegenerateSpectrum);
    }
    let bins = (values.len() as f64).sqrt().ceil() as usize;
    let upper = max * RANGE_PAD;
    let width = upper / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| i as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    for v in &values {
        let idx = ((v / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let total = values.len() as f64;
    let density = counts.iter().map(|&c| c as f64 / (total * width)).collect();
    Ok((edges, density))
}

struct Objective<'a> {
    edges: &'a [f64],
    empirical: &'a [f64],
    q: f64,
}

impl Objective<'_> {
    fn model_density(&self, sigma2: f64) -> Vec<f64> {
        let model = MpModel::new(sigma2, self.q).expect("search keeps sigma2 positive");
        self.edges
            .windows(2)
            .map(|w| mp_interval_mass(w[0], w[1], &model) / (w[1] - w[0]))
            .collect()
    }

    fn distance(&self, sigma2: f64) -> f64 {
        let model = self.model_density(sigma2);
        let width = self.edges[1] - self.edges[0];
        self.empirical
            .iter()
            .zip(&model)
            .map(|(e, m)| (e - m).powi(2) * width)
            .sum::<f64>()
            .sqrt()
    }
}

/// σ² minimizing the ℓ2 distance between the eigenvalue histogram and the MP
/// density averaged over each bin. Averaging rather than sampling at the bin
/// centre keeps the comparison exact when the bulk spans only a few bins.
///
/// Candidates are the points `r^m` of a fixed geometric lattice
/// (`r = 16^(1/63)`, so the window `[init/4, 4·init]` holds 64 of them) that
/// fall inside the window. The best lattice point is refined by golden-section
/// search over its own lattice cell `[r^(m−½), r^(m+½)]` to relative
/// tolerance 1e−4. Ties go to the smaller σ². Because the histogram, the
/// lattice and the cells do not depend on `init`, the result is
/// nondecreasing in `init`.
pub fn fit_sigma2(spectrum: &Spectrum, sigma2_init: f64) -> Result<(f64, HistogramFit)> {
    if !(sigma2_init.is_finite() && sigma2_init > 0.0) {
        return Err(Error::invalid(format!(
            "sigma2_init must be positive, got {sigma2_init}"
        )));
    }
    let (edges, empirical) = histogram_bins(spectrum)?;
    let objective = Objective {
        edges: &edges,
        empirical: &empirical,
        q: spectrum.q(),
    };

    let step = SEARCH_SPAN.powi(2).ln() / (GRID_POINTS - 1) as f64;
    let log_init = sigma2_init.ln();
    let span = SEARCH_SPAN.ln();
    let first = ((log_init - span) / step - 1e-9).ceil() as i64;
    let last = ((log_init + span) / step + 1e-9).floor() as i64;

    let mut best_m = first;
    let mut best_f = f64::INFINITY;
    for m in first..=last {
        let f = objective.distance((m as f64 * step).exp());
        if f < best_f {
            best_f = f;
            best_m = m;
        }
    }

    let grid_sigma2 = (best_m as f64 * step).exp();
    let refined = golden_section(
        |t| objective.distance(t.exp()),
        (best_m as f64 - 0.5) * step,
        (best_m as f64 + 0.5) * step,
    )
    .exp();
    let refined_f = objective.distance(refined);
    let sigma2 = if refined_f < best_f || (refined_f == best_f && refined < grid_sigma2) {
        refined
    } else {
        grid_sigma2
    };

    let model_density = objective.model_density(sigma2);
    let l2_distance = objective.distance(sigma2);
    Ok((
        sigma2,
        HistogramFit {
            bin_edges: edges,
            empirical_density: empirical,
            model_density,
            l2_distance,
        },
    ))
}

/// Minimizer of `f` on `[a, b]`, with the interval shrunk until its width
/// (in log σ², i.e. relative σ²) is below the tolerance.
fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > GOLDEN_REL_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
