use nalgebra::DMatrix;

use super::eigen::Spectrum;
use super::laws::MpModel;
use crate::error::{Error, Result};

/// Bulk/spike split of a spectrum. Row `i` of `spike_eigenvectors` belongs to
/// `spike_indices[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPartition {
    pub spike_indices: Vec<usize>,
    pub bulk_indices: Vec<usize>,
    pub spike_eigenvectors: DMatrix<f64>,
}

impl SpectralPartition {
    pub fn k(&self) -> usize {
        self.spike_indices.len()
    }
}

/// Spikes are eigenvalues strictly above `model.lambda_plus`; a value equal
/// to the edge stays in the bulk.
pub fn classify(
    spectrum: &Spectrum,
    eigenvectors: &DMatrix<f64>,
    model: &MpModel,
) -> Result<SpectralPartition> {
    let d = spectrum.d();
    if eigenvectors.shape() != (d, d) {
        return Err(Error::invalid(format!(
            "eigenvector matrix is {:?}, spectrum has d = {d}",
            eigenvectors.shape()
        )));
    }
    let (spike_indices, bulk_indices): (Vec<usize>, Vec<usize>) =
        (0..d).partition(|&i| spectrum.eigenvalues()[i] > model.lambda_plus);
    let spike_eigenvectors = eigenvectors.select_rows(spike_indices.iter());
    Ok(SpectralPartition {
        spike_indices,
        bulk_indices,
        spike_eigenvectors,
    })
}
