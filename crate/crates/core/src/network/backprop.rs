use nalgebra::{DMatrix, DVector};

use super::layer::Activation;
use super::Network;
use crate::error::{Error, Result};

/// Gradient of one trainable layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: DMatrix<f64>,
    pub bias: Option<DVector<f64>>,
}

/// Per-position gradients; `None` for frozen layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Option<LayerGradient>>,
}

struct ForwardCache {
    /// Input to each layer.
    inputs: Vec<DMatrix<f64>>,
    pre_activations: Vec<DMatrix<f64>>,
    shapes: Vec<(usize, usize)>,
}

/// Forward/backward workspace. [`Backprop::forward`] records the values that
/// [`Backprop::backward`] needs.
#[derive(Default)]
pub struct Backprop {
    cache: Option<ForwardCache>,
}

impl Backprop {
    pub fn new() -> Self {
        Self::default()
    }

    /// Forward pass that keeps per-layer inputs and pre-activations.
    pub fn forward(&mut self, net: &Network, batch: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        net.check_batch(batch)?;
        let layers = net.layers();
        let mut inputs = Vec::with_capacity(layers.len());
        let mut pre_activations = Vec::with_capacity(layers.len());
        let mut a = batch.clone();
        for layer in layers {
            let z = layer.pre_activation(&a);
            let mut next = z.clone();
            layer.activation.apply(&mut next);
            inputs.push(a);
            pre_activations.push(z);
            a = next;
        }
        self.cache = Some(ForwardCache {
            inputs,
            pre_activations,
            shapes: layers.iter().map(|l| l.weights.shape()).collect(),
        });
        Ok(a)
    }

    /// Parameter gradients given `∂loss/∂logits` for the cached batch.
    pub fn backward(&self, net: &Network, grad_logits: &DMatrix<f64>) -> Result<Gradients> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::InvalidState("backward called before forward".into()))?;
        let layers = net.layers();
        let shapes: Vec<(usize, usize)> = layers.iter().map(|l| l.weights.shape()).collect();
        if shapes != cache.shapes {
            return Err(Error::InvalidState(
                "network changed shape since the cached forward pass".into(),
            ));
        }
        let batch = cache.inputs[0].ncols();
        if grad_logits.shape() != (net.num_classes(), batch) {
            return Err(Error::invalid(format!(
                "logit gradient is {:?}, expected ({}, {batch})",
                grad_logits.shape(),
                net.num_classes()
            )));
        }

        let mut grads: Vec<Option<LayerGradient>> = vec![None; layers.len()];
        let mut delta = grad_logits.clone();
        for (pos, layer) in layers.iter().enumerate().rev() {
            if layer.activation == Activation::Relu {
                delta.zip_apply(&cache.pre_activations[pos], |d, z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            if !layer.frozen {
                let weights = &delta * cache.inputs[pos].transpose();
                let bias = layer.bias.as_ref().map(|_| {
                    DVector::from_iterator(delta.nrows(), delta.row_iter().map(|r| r.sum()))
                });
                grads[pos] = Some(LayerGradient { weights, bias });
            }
            if pos > 0 {
                delta = layer.weights.transpose() * &delta;
            }
        }
        Ok(Gradients { layers: grads })
    }
}
