use nalgebra::DMatrix;

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-8;
const MAX_SWEEPS: usize = 10_000;

/// Eigenvalues of a covariance, sorted descending, with the sample count that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    n: usize,
}

impl Spectrum {
    /// Sorts `eigenvalues` descending. Round-off negatives are kept as given
    /// and clamped to zero by [`Spectrum::clamped`].
    pub fn new(mut eigenvalues: Vec<f64>, n: usize) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::invalid("spectrum needs at least one eigenvalue"));
        }
        if n == 0 {
            return Err(Error::invalid("spectrum sample count must be positive"));
        }
        if eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite eigenvalue"));
        }
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { eigenvalues, n })
    }

    /// Raw eigenvalues, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvalues with negatives clamped to 0, descending.
    pub fn clamped(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|v| v.max(0.0)).collect()
    }

    pub fn d(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Aspect ratio d/n.
    pub fn q(&self) -> f64 {
        self.d() as f64 / self.n as f64
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[0].max(0.0)
    }
}

/// Eigenpairs of a symmetric matrix. Row `i` of `eigenvectors` belongs to
/// `eigenvalues[i]`; eigenvalues are descending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

/// Symmetric eigendecomposition, O(d³).
///
/// Each eigenvector is oriented so that its largest-magnitude component (the
/// first one, on ties) is positive, which makes the output deterministic.
pub fn eig_sym(matrix: &DMatrix<f64>) -> Result<EigenDecomposition> {
    let (rows, cols) = matrix.shape();
    if rows != cols || rows == 0 {
        return Err(Error::invalid(format!(
            "eig_sym needs a non-empty square matrix, got {rows}x{cols}"
        )));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let scale = matrix.amax().max(1.0);
    for i in 0..rows {
        for j in (i + 1)..rows {
            if (matrix[(i, j)] - matrix[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::invalid(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }

    let eig = matrix
        .clone()
        .try_symmetric_eigen(f64::EPSILON, MAX_SWEEPS)
        .ok_or_else(|| Error::NumericalFailure("symmetric eigensolver did not converge".into()))?;

    let mut order: Vec<usize> = (0..rows).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut eigenvalues = Vec::with_capacity(rows);
    let mut eigenvectors = DMatrix::zeros(rows, rows);
    for (out_row, &src) in order.iter().enumerate() {
        eigenvalues.push(eig.eigenvalues[src]);
        let column = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for (i, v) in column.iter().enumerate() {
            if v.abs() > column[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if column[pivot] < 0.0 { -1.0 } else { 1.0 };
        for (i, v) in column.iter().enumerate() {
            eigenvectors[(out_row, i)] = sign * v;
        }
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}
