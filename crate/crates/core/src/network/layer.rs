use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, z: &mut DMatrix<f64>) {
        if self == Activation::Relu {
            z.apply(|v| *v = v.max(0.0));
        }
    }
}

/// Fully connected layer `a ↦ act(W·a + b)`. `weights` is `out × in`.
///
/// Frozen layers (inserted projections) are never updated by the optimizer
/// and carry no bias.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: DMatrix<f64>,
    pub bias: Option<DVector<f64>>,
    pub activation: Activation,
    pub frozen: bool,
}

impl DenseLayer {
    pub fn new(weights: DMatrix<f64>, bias: DVector<f64>, activation: Activation) -> Self {
        Self {
            weights,
            bias: Some(bias),
            activation,
            frozen: false,
        }
    }

    /// Frozen, bias-free, linear map.
    pub fn projection(matrix: DMatrix<f64>) -> Self {
        Self {
            weights: matrix,
            bias: None,
            activation: Activation::Identity,
            frozen: true,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.as_ref().map_or(0, |b| b.len())
    }

    /// Pre-activation `W·a + b` for a batch stored column-wise.
    pub fn pre_activation(&self, input: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = &self.weights * input;
        if let Some(b) = &self.bias {
            for mut col in z.column_iter_mut() {
                col += b;
            }
        }
        z
    }
}
