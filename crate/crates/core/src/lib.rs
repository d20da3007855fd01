//! Random-matrix guided width reduction for dense networks.
//!
//! A trained network's hidden activations are collected on a calibration
//! sample, their covariance spectrum is compared against the Marchenko–Pastur
//! law, and each layer is projected onto the eigenvectors whose eigenvalues
//! rise above the noise bulk. The narrower network is then fine-tuned against
//! a frozen copy of itself.
//!
//! - [`spectral`]: covariance, eigendecomposition, MP/Wigner/BBP laws, σ² fit,
//!   spike classification.
//! - [`network`]: dense layers, backpropagation, momentum SGD, checkpoints.
//! - [`distill`]: combined cross-entropy + KL loss and the training loop.
//! - [`reducer`]: projections, layer surgery, the compression loop, and the
//!   quantile ablation.
//! - [`data`]: synthetic generators, CSV datasets, stratified splits.

pub mod data;
pub mod distill;
mod error;
pub mod network;
pub mod reducer;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
