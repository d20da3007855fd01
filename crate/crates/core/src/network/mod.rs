//! Dense feed-forward networks with manual backpropagation.
//!
//! Layers are addressed in two ways. A *position* indexes `layers()` directly.
//! A *layer id* counts only trainable (non-frozen) layers, so ids stay stable
//! when a frozen projection is inserted behind a layer.

mod backprop;
mod checkpoint;
mod layer;
mod optim;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use backprop::{Backprop, Gradients, LayerGradient};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, FORMAT_VERSION};
pub use layer::{Activation, DenseLayer};
pub use optim::Sgd;

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::spectral::ActivationMatrix;

/// One width reduction: trainable layer `layer_id` now feeds `k < d`
/// directions downstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionEvent {
    pub layer_id: usize,
    pub d: usize,
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub trainable: usize,
    pub frozen: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<DenseLayer>,
    input_dim: usize,
    num_classes: usize,
    history: Vec<ReductionEvent>,
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>, input_dim: usize, num_classes: usize) -> Result<Self> {
        Self::with_history(layers, input_dim, num_classes, Vec::new())
    }

    pub fn with_history(
        layers: Vec<DenseLayer>,
        input_dim: usize,
        num_classes: usize,
        history: Vec<ReductionEvent>,
    ) -> Result<Self> {
        let net = Self {
            layers,
            input_dim,
            num_classes,
            history,
        };
        net.validate()?;
        Ok(net)
    }

    /// ReLU hidden layers of the given widths and a linear output layer.
    /// Weights are drawn N(0, 2/fan_in) for hidden layers and N(0, 1/fan_in)
    /// for the output layer; biases start at zero.
    pub fn mlp(input_dim: usize, hidden: &[usize], num_classes: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || num_classes == 0 || hidden.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        let mut rng = SeededRng::new(seed);
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = input_dim;
        let widths = hidden.iter().copied().chain(std::iter::once(num_classes));
        for (i, out) in widths.enumerate() {
            let is_output = i == hidden.len();
            let gain = if is_output { 1.0 } else { 2.0 };
            let std = (gain / fan_in as f64).sqrt();
            let w = DMatrix::from_fn(out, fan_in, |_, _| std * rng.gaussian());
            let act = if is_output { Activation::Identity } else { Activation::Relu };
            layers.push(DenseLayer::new(w, DVector::zeros(out), act));
            fan_in = out;
        }
        Self::new(layers, input_dim, num_classes)
    }

    /// Checks dimension chaining, output width, bias shapes, and history.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid("network has no layers"));
        }
        let mut width = self.input_dim;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.in_dim() != width {
                return Err(Error::invalid(format!(
                    "layer {i} expects {} inputs but receives {width}",
                    layer.in_dim()
                )));
            }
            if let Some(b) = &layer.bias {
                if b.len() != layer.out_dim() {
                    return Err(Error::invalid(format!("layer {i} bias has wrong length")));
                }
            }
            width = layer.out_dim();
        }
        if width != self.num_classes {
            return Err(Error::invalid(format!(
                "network emits {width} outputs for {} classes",
                self.num_classes
            )));
        }
        if self.layers.last().is_some_and(|l| l.frozen) {
            return Err(Error::invalid("output layer cannot be frozen"));
        }
        if let Some(e) = self.history.iter().find(|e| e.k >= e.d) {
            return Err(Error::invalid(format!(
                "history entry for layer {} has k = {} >= d = {}",
                e.layer_id, e.k, e.d
            )));
        }
        Ok(())
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn history(&self) -> &[ReductionEvent] {
        &self.history
    }

    pub fn trainable_layers(&self) -> usize {
        self.layers.iter().filter(|l| !l.frozen).count()
    }

    /// Position in `layers()` of trainable layer `layer_id`.
    pub fn position_of(&self, layer_id: usize) -> Result<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.frozen)
            .nth(layer_id)
            .map(|(p, _)| p)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "layer id {layer_id} out of range ({} trainable layers)",
                    self.trainable_layers()
                ))
            })
    }

    /// Ids of trainable layers that are not the output layer.
    pub fn hidden_layer_ids(&self) -> Vec<usize> {
        (0..self.trainable_layers().saturating_sub(1)).collect()
    }

    pub fn param_count(&self) -> ParamCount {
        let mut count = ParamCount {
            trainable: 0,
            frozen: 0,
        };
        for l in &self.layers {
            if l.frozen {
                count.frozen += l.param_count();
            } else {
                count.trainable += l.param_count();
            }
        }
        count
    }

    /// Logits for a batch stored column-wise (`input_dim × b`). When
    /// `capture_layer` is given, also returns that trainable layer's
    /// post-activation output.
    pub fn forward(
        &self,
        batch: &DMatrix<f64>,
        capture_layer: Option<usize>,
    ) -> Result<(DMatrix<f64>, Option<ActivationMatrix>)> {
        self.check_batch(batch)?;
        let capture_pos = capture_layer.map(|id| self.position_of(id)).transpose()?;
        let mut a = batch.clone();
        let mut trace = None;
        for (pos, layer) in self.layers.iter().enumerate() {
            let mut z = layer.pre_activation(&a);
            layer.activation.apply(&mut z);
            a = z;
            if Some(pos) == capture_pos {
                trace = Some(ActivationMatrix::new(a.clone(), capture_layer.unwrap())?);
            }
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("non-finite logits".into()));
        }
        Ok((a, trace))
    }

    /// Logits only.
    pub fn logits(&self, batch: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.forward(batch, None)?.0)
    }

    /// Argmax class per column.
    pub fn predict(&self, batch: &DMatrix<f64>) -> Result<Vec<usize>> {
        let logits = self.logits(batch)?;
        Ok(logits.column_iter().map(|c| c.argmax().0).collect())
    }

    pub(crate) fn check_batch(&self, batch: &DMatrix<f64>) -> Result<()> {
        if batch.nrows() != self.input_dim {
            return Err(Error::invalid(format!(
                "batch has {} rows, network expects {}",
                batch.nrows(),
                self.input_dim
            )));
        }
        if batch.ncols() == 0 {
            return Err(Error::invalid("batch is empty"));
        }
        Ok(())
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    /// Replace the layer stack and history, re-checking every invariant. On
    /// failure `self` is left untouched.
    pub(crate) fn rebuild(
        &mut self,
        layers: Vec<DenseLayer>,
        history: Vec<ReductionEvent>,
    ) -> Result<()> {
        let candidate = Network::with_history(layers, self.input_dim, self.num_classes, history)?;
        *self = candidate;
        Ok(())
    }

    pub fn summary(&self) -> NetworkSummary {
        let mut next_id = 0;
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(position, l)| {
                let layer_id = (!l.frozen).then(|| {
                    next_id += 1;
                    next_id - 1
                });
                LayerSummary {
                    position,
                    layer_id,
                    in_dim: l.in_dim(),
                    out_dim: l.out_dim(),
                    activation: l.activation,
                    frozen: l.frozen,
                    params: l.param_count(),
                }
            })
            .collect();
        NetworkSummary {
            input_dim: self.input_dim,
            num_classes: self.num_classes,
            layers,
            history: self.history.clone(),
            params: self.param_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSummary {
    pub position: usize,
    pub layer_id: Option<usize>,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub frozen: bool,
    pub params: usize,
}

/// Shapes, frozen flags, parameter counts, and reduction history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSummary {
    pub input_dim: usize,
    pub num_classes: usize,
    pub layers: Vec<LayerSummary>,
    pub history: Vec<ReductionEvent>,
    pub params: ParamCount,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_network_passes_input_through() {
        let layer = DenseLayer::new(DMatrix::identity(3, 3), DVector::zeros(3), Activation::Identity);
        let net = Network::new(vec![layer], 3, 3).unwrap();
        let batch = DMatrix::from_row_slice(3, 2, &[1.0, -2.0, 3.0, 4.0, -5.0, 6.0]);
        assert_eq!(net.logits(&batch).unwrap(), batch);
    }

    #[test]
    fn zero_weights_emit_bias() {
        let bias = DVector::from_vec(vec![0.5, -1.5]);
        let layer = DenseLayer::new(DMatrix::zeros(2, 4), bias.clone(), Activation::Identity);
        let net = Network::new(vec![layer], 4, 2).unwrap();
        let batch = DMatrix::from_fn(4, 3, |r, c| (r + c) as f64);
        let out = net.logits(&batch).unwrap();
        for col in out.column_iter() {
            assert_eq!(col, bias);
        }
    }

    #[test]
    fn matches_naive_reimplementation() {
        let net = Network::mlp(4, &[6], 3, 3).unwrap();
        let mut rng = SeededRng::new(30);
        let batch = DMatrix::from_fn(4, 5, |_, _| rng.gaussian());
        let out = net.logits(&batch).unwrap();
        for s in 0..5 {
            let mut a: Vec<f64> = batch.column(s).iter().copied().collect();
            for layer in net.layers() {
                let b = layer.bias.as_ref().unwrap();
                let mut next = vec![0.0; layer.out_dim()];
                for (i, slot) in next.iter_mut().enumerate() {
                    let mut acc = b[i];
                    for (j, aj) in a.iter().enumerate() {
                        acc += layer.weights[(i, j)] * aj;
                    }
                    *slot = match layer.activation {
                        Activation::Relu => acc.max(0.0),
                        Activation::Identity => acc,
                    };
                }
                a = next;
            }
            for (i, v) in a.iter().enumerate() {
                assert!((out[(i, s)] - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn capture_returns_post_activation() {
        let net = Network::mlp(3, &[5, 4], 2, 1).unwrap();
        let batch = DMatrix::from_fn(3, 7, |r, c| (r as f64 - c as f64) * 0.3);
        let (_, trace) = net.forward(&batch, Some(1)).unwrap();
        let trace = trace.unwrap();
        assert_eq!((trace.d(), trace.n()), (4, 7));
        assert!(trace.entries().iter().all(|&v| v >= 0.0));
        assert_eq!(trace.layer_id(), 1);
    }

    #[test]
    fn shape_mismatch_is_invalid_input() {
        let net = Network::mlp(3, &[4], 2, 1).unwrap();
        assert!(matches!(net.forward(&DMatrix::zeros(2, 4), None), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn param_counts() {
        let layer = DenseLayer::new(DMatrix::zeros(2, 3), DVector::zeros(2), Activation::Identity);
        let net = Network::new(vec![layer], 3, 2).unwrap();
        assert_eq!(net.param_count(), ParamCount { trainable: 8, frozen: 0 });

        let proj = DenseLayer::projection(DMatrix::zeros(2, 4));
        let hidden = DenseLayer::new(DMatrix::zeros(4, 3), DVector::zeros(4), Activation::Relu);
        let out = DenseLayer::new(DMatrix::zeros(2, 2), DVector::zeros(2), Activation::Identity);
        let net = Network::new(vec![hidden, proj, out], 3, 2).unwrap();
        assert_eq!(net.param_count(), ParamCount { trainable: 16 + 6, frozen: 8 });
        assert_eq!(net.position_of(1).unwrap(), 2);
    }

    #[test]
    fn chaining_is_enforced() {
        let a = DenseLayer::new(DMatrix::zeros(4, 3), DVector::zeros(4), Activation::Relu);
        let b = DenseLayer::new(DMatrix::zeros(2, 5), DVector::zeros(2), Activation::Identity);
        assert!(Network::new(vec![a, b], 3, 2).is_err());
    }
}
