use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::network::{DenseLayer, Network, ReductionEvent};
use crate::spectral::{SpectralPartition, Spectrum};

const ORTHONORMAL_TOL: f64 = 1e-8;

/// `k × d` map onto the retained eigenvectors of trainable layer `layer_id`,
/// rows in descending eigenvalue order.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub matrix: DMatrix<f64>,
    pub layer_id: usize,
    pub retained_eigenvalues: Vec<f64>,
}

impl Projection {
    pub fn new(matrix: DMatrix<f64>, layer_id: usize, retained_eigenvalues: Vec<f64>) -> Result<Self> {
        let (k, d) = matrix.shape();
        if k == 0 || k > d {
            return Err(Error::invalid(format!("projection must have 1 <= k <= d, got {k}x{d}")));
        }
        if retained_eigenvalues.len() != k {
            return Err(Error::invalid("one retained eigenvalue per projection row"));
        }
        let gram = &matrix * matrix.transpose();
        let err = (gram - DMatrix::<f64>::identity(k, k)).amax();
        if err > ORTHONORMAL_TOL {
            return Err(Error::invalid(format!("projection rows are not orthonormal (error {err:e})")));
        }
        Ok(Self {
            matrix,
            layer_id,
            retained_eigenvalues,
        })
    }

    pub fn k(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn d(&self) -> usize {
        self.matrix.ncols()
    }

    /// `‖P·Pᵀ − I‖_max`.
    pub fn orthonormality_error(&self) -> f64 {
        let k = self.k();
        (&self.matrix * self.matrix.transpose() - DMatrix::<f64>::identity(k, k)).amax()
    }
}

/// Projection onto the spike eigenvectors. With fewer than `min_k` spikes the
/// largest bulk eigenvectors are appended until there are `min_k` rows (at most
/// `d`). No spikes at all is [`Error::NoSpikes`].
pub fn build_projection(
    partition: &SpectralPartition,
    spectrum: &Spectrum,
    eigenvectors: &DMatrix<f64>,
    layer_id: usize,
    min_k: usize,
) -> Result<Projection> {
    if partition.k() == 0 {
        return Err(Error::NoSpikes { layer_id });
    }
    let d = spectrum.d();
    let target = partition.k().max(min_k).min(d);
    let rows: Vec<usize> = partition
        .spike_indices
        .iter()
        .chain(&partition.bulk_indices)
        .copied()
        .take(target)
        .collect();
    let matrix = eigenvectors.select_rows(rows.iter());
    let retained = rows.iter().map(|&i| spectrum.eigenvalues()[i]).collect();
    Projection::new(matrix, layer_id, retained)
}

/// Insert `P` as a frozen linear layer after trainable layer `proj.layer_id`
/// and warm-start the next trainable layer as `W·Pᵀ`. Records `(layer_id, d,
/// k)` in the history when `k < d`.
pub fn apply_projection(net: &Network, proj: &Projection) -> Result<Network> {
    let pos = net.position_of(proj.layer_id)?;
    let layers = net.layers();
    if pos + 1 >= layers.len() {
        return Err(Error::invalid(format!(
            "layer {} is the output layer and cannot be projected",
            proj.layer_id
        )));
    }
    let d = layers[pos].out_dim();
    if proj.d() != d {
        return Err(Error::invalid(format!(
            "projection has {} columns but layer {} emits {d}",
            proj.d(),
            proj.layer_id
        )));
    }
    if layers[pos + 1].frozen {
        return Err(Error::AlreadyProjected {
            layer_id: proj.layer_id,
        });
    }
    let mut new_layers = layers.to_vec();
    let downstream = &mut new_layers[pos + 1];
    downstream.weights = &downstream.weights * proj.matrix.transpose();
    new_layers.insert(pos + 1, DenseLayer::projection(proj.matrix.clone()));

    let mut history = net.history().to_vec();
    if proj.k() < d {
        history.push(ReductionEvent {
            layer_id: proj.layer_id,
            d,
            k: proj.k(),
        });
    }
    let mut out = net.clone();
    out.rebuild(new_layers, history)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use crate::spectral::{classify, eig_sym, MpModel};

    fn partition_with_spikes(d: usize, spikes: usize) -> (SpectralPartition, Spectrum, DMatrix<f64>) {
        let values: Vec<f64> = (0..d)
            .map(|i| if i < spikes { 10.0 + i as f64 } else { 1.0 - 0.01 * i as f64 })
            .collect();
        let mut rng = SeededRng::new(d as u64);
        let a = DMatrix::from_fn(d, d, |_, _| rng.gaussian());
        let sym = &a * a.transpose();
        let eig = eig_sym(&sym).unwrap();
        let spectrum = Spectrum::new(values, 10 * d).unwrap();
        let model = MpModel::new(1.0, 0.1).unwrap();
        let p = classify(&spectrum, &eig.eigenvectors, &model).unwrap();
        (p, spectrum, eig.eigenvectors)
    }

    #[test]
    fn two_spikes_give_orthonormal_rows() {
        let (p, s, v) = partition_with_spikes(4, 2);
        let proj = build_projection(&p, &s, &v, 0, 1).unwrap();
        assert_eq!(proj.matrix.shape(), (2, 4));
        assert!(proj.orthonormality_error() < 1e-12);
    }

    #[test]
    fn no_spikes() {
        let (p, s, v) = partition_with_spikes(4, 0);
        assert!(matches!(build_projection(&p, &s, &v, 3, 1), Err(Error::NoSpikes { layer_id: 3 })));
    }

    #[test]
    fn pads_to_min_k_with_bulk() {
        let (p, s, v) = partition_with_spikes(6, 1);
        let proj = build_projection(&p, &s, &v, 0, 3).unwrap();
        assert_eq!(proj.k(), 3);
        assert_eq!(proj.retained_eigenvalues, vec![10.0, 1.0 - 0.01, 1.0 - 0.02]);
        assert_eq!(proj.matrix.row(1), v.row(1));
    }

    #[test]
    fn identity_projection_preserves_function() {
        let net = Network::mlp(5, &[6, 4], 3, 1).unwrap();
        let proj = Projection::new(DMatrix::identity(6, 6), 0, vec![1.0; 6]).unwrap();
        let out = apply_projection(&net, &proj).unwrap();
        let mut rng = SeededRng::new(2);
        let batch = DMatrix::from_fn(5, 9, |_, _| rng.gaussian());
        let diff = (net.logits(&batch).unwrap() - out.logits(&batch).unwrap()).amax();
        assert!(diff <= 1e-12);
        assert!(out.history().is_empty());
    }

    #[test]
    fn shape_accounting() {
        let net = Network::mlp(4, &[8, 5], 3, 1).unwrap();
        let mut rng = SeededRng::new(1);
        let basis = crate::data::orthonormal_columns(8, 3, &mut rng, &[]);
        let p = DMatrix::from_columns(&basis).transpose();
        let proj = Projection::new(p, 0, vec![3.0, 2.0, 1.0]).unwrap();
        let out = apply_projection(&net, &proj).unwrap();
        assert_eq!(out.layers()[2].in_dim(), 3);
        let before = net.param_count();
        let after = out.param_count();
        assert_eq!(before.trainable - after.trainable, 5 * (8 - 3));
        assert_eq!(after.frozen, 3 * 8);
        assert_eq!(out.history(), &[ReductionEvent { layer_id: 0, d: 8, k: 3 }]);
        assert!(matches!(
            apply_projection(&out, &proj),
            Err(Error::AlreadyProjected { layer_id: 0 })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let net = Network::mlp(4, &[8], 3, 1).unwrap();
        let proj = Projection::new(DMatrix::identity(5, 5), 0, vec![1.0; 5]).unwrap();
        assert!(matches!(apply_projection(&net, &proj), Err(Error::InvalidInput(_))));
        let out_layer = Projection::new(DMatrix::identity(3, 3), 1, vec![1.0; 3]).unwrap();
        assert!(apply_projection(&net, &out_layer).is_err());
    }
}
