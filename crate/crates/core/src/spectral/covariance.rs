use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Hidden activations of one layer: `d` features × `n` calibration samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMatrix {
    entries: DMatrix<f64>,
    layer_id: usize,
}

impl ActivationMatrix {
    pub fn new(entries: DMatrix<f64>, layer_id: usize) -> Result<Self> {
        if entries.nrows() < 1 {
            return Err(Error::invalid("activation matrix needs d >= 1"));
        }
        if entries.ncols() < 2 {
            return Err(Error::invalid("activation matrix needs n >= 2 samples"));
        }
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % entries.nrows(), pos / entries.nrows());
            return Err(Error::invalid(format!(
                "non-finite activation at ({r}, {c})"
            )));
        }
        Ok(Self { entries, layer_id })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn layer_id(&self) -> usize {
        self.layer_id
    }

    pub fn d(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n(&self) -> usize {
        self.entries.ncols()
    }
}

/// Uncentered empirical covariance `(1/n)·X·Xᵀ`.
pub fn compute_covariance(x: &ActivationMatrix) -> Result<DMatrix<f64>> {
    compute_covariance_with(x, false)
}

/// Covariance with optional per-feature mean removal. O(n·d²).
pub fn compute_covariance_with(x: &ActivationMatrix, center: bool) -> Result<DMatrix<f64>> {
    let n = x.n() as f64;
    let mut cov = if center {
        let mut centered = x.entries.clone();
        for mut row in centered.row_iter_mut() {
            let mean = row.sum() / n;
            row.add_scalar_mut(-mean);
        }
        &centered * centered.transpose()
    } else {
        &x.entries * x.entries.transpose()
    };
    cov /= n;
    // gemm blocking can make c_ij and c_ji differ in the last bit
    let d = cov.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            let v = cov[(i, j)];
            cov[(j, i)] = v;
        }
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("covariance overflowed"));
    }
    Ok(cov)
}
