//! Random-matrix spectral analysis of layer activations.
//!
//! The pipeline for one layer is: [`compute_covariance`] → [`eig_sym`] →
//! [`init_sigma2`] → [`fit_sigma2`] → [`classify`]. Eigenvalues above the
//! Marchenko–Pastur upper edge λ₊ are spikes; their eigenvectors span the
//! subspace a layer is later projected onto.

mod covariance;
mod eigen;
mod export;
mod fit;
mod laws;
mod partition;

pub use covariance::{compute_covariance, compute_covariance_with, ActivationMatrix};
pub use eigen::{eig_sym, EigenDecomposition, Spectrum};
pub use export::{write_histogram_csv, write_mp_model_json, write_spectrum_csv};
pub use fit::{fit_sigma2, histogram_bins, init_sigma2, HistogramFit, DEFAULT_QUANTILE};
pub use laws::{
    bbp_threshold, mp_bulk_edges, mp_density, mp_interval_mass, wigner_semicircle_density, MpModel,
};
pub use partition::{classify, SpectralPartition};

/// Result of running the full analysis on one activation snapshot.
#[derive(Debug, Clone)]
pub struct LayerAnalysis {
    pub spectrum: Spectrum,
    pub model: MpModel,
    pub fit: Option<HistogramFit>,
    pub partition: SpectralPartition,
    pub eigenvectors: nalgebra::DMatrix<f64>,
}

/// Covariance, eigendecomposition, σ² initialization at `quantile`, σ² fit and
/// spike classification for one activation matrix.
///
/// A degenerate spectrum keeps the quantile initialization as σ².
pub fn analyze(x: &ActivationMatrix, quantile: f64, center: bool) -> crate::Result<LayerAnalysis> {
    let cov = compute_covariance_with(x, center)?;
    let EigenDecomposition {
        eigenvalues,
        eigenvectors,
    } = eig_sym(&cov)?;
    let spectrum = Spectrum::new(eigenvalues, x.n())?;
    let init = init_sigma2(&spectrum, quantile)?;
    let init = if init > 0.0 { init } else { f64::MIN_POSITIVE.max(spectrum.max() * 1e-12) };
    let (sigma2, fit) = match fit_sigma2(&spectrum, init) {
        Ok((s, f)) => (s, Some(f)),
        Err(crate::Error::DegenerateSpectrum) => (init, None),
        Err(e) => return Err(e),
    };
    let model = MpModel::new(sigma2, spectrum.q())?;
    let partition = classify(&spectrum, &eigenvectors, &model)?;
    Ok(LayerAnalysis {
        spectrum,
        model,
        fit,
        partition,
        eigenvectors,
    })
}
