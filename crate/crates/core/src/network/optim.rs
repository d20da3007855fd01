use nalgebra::{DMatrix, DVector};

use super::backprop::Gradients;
use super::Network;
use crate::error::{Error, Result};

type Velocity = Option<(DMatrix<f64>, Option<DVector<f64>>)>;

/// Momentum SGD: `v ← μ·v + g`, `θ ← θ − lr·v`. Frozen layers are skipped.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    velocity: Vec<Velocity>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64) -> Result<Self> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::invalid(format!("lr must be non-negative, got {lr}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::invalid(format!("momentum must be in [0, 1), got {momentum}")));
        }
        Ok(Self {
            lr,
            momentum,
            velocity: Vec::new(),
        })
    }

    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        let layers = net.layers_mut();
        if grads.layers.len() != layers.len() {
            return Err(Error::invalid("gradient list does not match the network"));
        }
        if self.velocity.len() != layers.len() {
            self.velocity = vec![None; layers.len()];
        }
        for ((layer, grad), vel) in layers.iter_mut().zip(&grads.layers).zip(&mut self.velocity) {
            let Some(grad) = grad else { continue };
            if layer.frozen {
                continue;
            }
            if grad.weights.shape() != layer.weights.shape() {
                return Err(Error::invalid("gradient shape does not match layer"));
            }
            let fresh = match vel {
                Some((vw, _)) => vw.shape() != layer.weights.shape(),
                None => true,
            };
            if fresh {
                *vel = Some((
                    DMatrix::zeros(layer.weights.nrows(), layer.weights.ncols()),
                    layer.bias.as_ref().map(|b| DVector::zeros(b.len())),
                ));
            }
            let (vw, vb) = vel.as_mut().unwrap();
            *vw *= self.momentum;
            *vw += &grad.weights;
            layer.weights -= &*vw * self.lr;
            if let (Some(bias), Some(vb), Some(gb)) = (layer.bias.as_mut(), vb.as_mut(), grad.bias.as_ref()) {
                *vb *= self.momentum;
                *vb += gb;
                bias.axpy(-self.lr, vb, 1.0);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Activation, DenseLayer, LayerGradient};

    fn scalar_net(w: f64) -> Network {
        let layer = DenseLayer::new(DMatrix::from_element(1, 1, w), DVector::zeros(1), Activation::Identity);
        Network::new(vec![layer], 1, 1).unwrap()
    }

    fn grad(g: f64) -> Gradients {
        Gradients {
            layers: vec![Some(LayerGradient {
                weights: DMatrix::from_element(1, 1, g),
                bias: Some(DVector::zeros(1)),
            })],
        }
    }

    #[test]
    fn zero_lr_is_a_no_op() {
        let mut net = scalar_net(1.25);
        let before = net.clone();
        Sgd::new(0.0, 0.9).unwrap().step(&mut net, &grad(3.0)).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn plain_sgd_step() {
        let mut net = scalar_net(1.0);
        Sgd::new(0.1, 0.0).unwrap().step(&mut net, &grad(2.0)).unwrap();
        assert_eq!(net.layers()[0].weights[(0, 0)], 1.0 - 0.1 * 2.0);
    }

    #[test]
    fn momentum_recurrence() {
        // v1 = g1, w1 = w0 − lr·v1; v2 = μ·v1 + g2, w2 = w1 − lr·v2
        let (w0, lr, mu, g1, g2) = (1.0, 0.1, 0.9, 2.0, -1.0);
        let mut net = scalar_net(w0);
        let mut opt = Sgd::new(lr, mu).unwrap();
        opt.step(&mut net, &grad(g1)).unwrap();
        opt.step(&mut net, &grad(g2)).unwrap();
        let v1 = g1;
        let w1 = w0 - lr * v1;
        let v2 = mu * v1 + g2;
        let w2 = w1 - lr * v2;
        assert_eq!(net.layers()[0].weights[(0, 0)], w2);
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        assert!(Sgd::new(-1.0, 0.0).is_err());
        assert!(Sgd::new(0.1, 1.0).is_err());
    }
}
