//! Binary checkpoint format.
//!
//! ```text
//! "RMTK" | version: u32 LE | header_len: u64 LE | header (JSON) | payload
//! ```
//!
//! The payload holds, in order: each layer's weights as row-major `f64` LE
//! followed by its bias (if any), then one `f64` per metric in header key
//! order, then the raw RNG state bytes.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::layer::{Activation, DenseLayer};
use super::{Network, ReductionEvent};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"RMTK";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub format_version: u32,
    pub network: Network,
    pub rng_state: Vec<u8>,
    pub metrics: BTreeMap<String, f64>,
}

impl Checkpoint {
    pub fn new(network: Network, rng_state: Vec<u8>, metrics: BTreeMap<String, f64>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            network,
            rng_state,
            metrics,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            input_dim: self.network.input_dim(),
            num_classes: self.network.num_classes(),
            layers: self
                .network
                .layers()
                .iter()
                .map(|l| LayerHeader {
                    rows: l.out_dim(),
                    cols: l.in_dim(),
                    activation: l.activation,
                    frozen: l.frozen,
                    has_bias: l.bias.is_some(),
                })
                .collect(),
            history: self.network.history().to_vec(),
            metric_keys: self.metrics.keys().cloned().collect(),
            rng_state_len: self.rng_state.len(),
        };
        let header = serde_json::to_vec(&header).expect("header is plain data");

        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.format_version.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for layer in self.network.layers() {
            for row in layer.weights.row_iter() {
                for v in row.iter() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            if let Some(b) = &layer.bias {
                for v in b.iter() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        for v in self.metrics.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.rng_state);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::CorruptFile(m.to_string());
        if bytes.len() < 16 {
            return Err(corrupt("file too short for the preamble"));
        }
        if &bytes[..4] != MAGIC {
            return Err(corrupt("bad magic bytes"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let header_end = 16usize
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| corrupt("truncated header"))?;
        let header: Header = serde_json::from_slice(&bytes[16..header_end])
            .map_err(|e| Error::CorruptFile(format!("bad header: {e}")))?;

        let mut reader = Floats {
            bytes: &bytes[header_end..],
        };
        let mut layers = Vec::with_capacity(header.layers.len());
        for lh in &header.layers {
            let values = reader.take(lh.rows.checked_mul(lh.cols).ok_or_else(|| corrupt("layer too large"))?)?;
            let weights = DMatrix::from_row_slice(lh.rows, lh.cols, &values);
            let bias = if lh.has_bias {
                Some(DVector::from_vec(reader.take(lh.rows)?))
            } else {
                None
            };
            layers.push(DenseLayer {
                weights,
                bias,
                activation: lh.activation,
                frozen: lh.frozen,
            });
        }
        let metric_values = reader.take(header.metric_keys.len())?;
        let metrics = header.metric_keys.into_iter().zip(metric_values).collect();
        if reader.bytes.len() != header.rng_state_len {
            return Err(corrupt("payload length does not match header"));
        }
        let rng_state = reader.bytes.to_vec();
        let network = Network::with_history(layers, header.input_dim, header.num_classes, header.history)
            .map_err(|e| Error::CorruptFile(format!("inconsistent network: {e}")))?;
        Ok(Self {
            format_version: version,
            network,
            rng_state,
            metrics,
        })
    }
}

struct Floats<'a> {
    bytes: &'a [u8],
}

impl Floats<'_> {
    fn take(&mut self, count: usize) -> Result<Vec<f64>> {
        let len = count
            .checked_mul(8)
            .filter(|&l| l <= self.bytes.len())
            .ok_or_else(|| Error::CorruptFile("truncated payload".into()))?;
        let (head, rest) = self.bytes.split_at(len);
        self.bytes = rest;
        Ok(head
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    input_dim: usize,
    num_classes: usize,
    layers: Vec<LayerHeader>,
    history: Vec<ReductionEvent>,
    metric_keys: Vec<String>,
    rng_state_len: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerHeader {
    rows: usize,
    cols: usize,
    activation: Activation,
    frozen: bool,
    has_bias: bool,
}

pub fn save_checkpoint(cp: &Checkpoint, path: &Path) -> Result<()> {
    std::fs::write(path, cp.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn sample() -> Checkpoint {
        let mut net = Network::mlp(5, &[7, 4], 3, 2).unwrap();
        let mut layers = net.layers().to_vec();
        layers.insert(1, DenseLayer::projection(DMatrix::from_fn(2, 7, |r, c| (r * 7 + c) as f64 / 10.0)));
        layers[2].weights = DMatrix::from_element(4, 2, -0.0);
        let history = vec![ReductionEvent { layer_id: 0, d: 7, k: 2 }];
        net.rebuild(layers, history).unwrap();
        let mut metrics = BTreeMap::new();
        metrics.insert("val_accuracy".to_string(), 0.875);
        metrics.insert("odd".to_string(), f64::NAN);
        let mut rng = SeededRng::new(8);
        rng.gaussian();
        Checkpoint::new(net, rng.state_bytes(), metrics)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let cp = sample();
        let bytes = cp.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.network, cp.network);
        assert_eq!(back.rng_state, cp.rng_state);
        assert!(back.metrics["odd"].is_nan());
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let bytes = sample().to_bytes();
        for cut in [3, 15, 40, bytes.len() - 1] {
            assert!(matches!(
                Checkpoint::from_bytes(&bytes[..cut]),
                Err(Error::CorruptFile(_))
            ));
        }
    }

    #[test]
    fn bad_magic_is_corrupt() {
        let mut bytes = sample().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::CorruptFile(_))));
    }

    #[test]
    fn future_version_is_rejected() {
        let mut bytes = sample().to_bytes();
        bytes[4..8].copy_from_slice(&99u32.to_le_bytes());
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(Error::VersionMismatch { found: 99, .. })
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.rmtk");
        let cp = sample();
        save_checkpoint(&cp, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap().to_bytes(), cp.to_bytes());
    }
}
