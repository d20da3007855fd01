//! Seeded randomness.
//!
//! Every random draw in the crate goes through [`SeededRng`], a ChaCha8
//! stream cipher used as a counter-based generator: its output depends only on
//! the 32-byte key, the stream id and the word position, so sequences are
//! identical across platforms. Gaussian variates use the Marsaglia polar
//! method.
//!
//! Sub-seeds are derived with [`derive_seed`]: the first eight bytes
//! (little-endian) of `SHA-256(seed.to_le_bytes() || tag)`. Any component of a
//! run can therefore be re-derived from the top-level seed and its tag.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Derive a child seed from `seed` and a component tag.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(tag.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Length of [`SeededRng::state_bytes`].
pub const RNG_STATE_LEN: usize = 32 + 8 + 16 + 1 + 8;

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: ChaCha8Rng,
    spare: Option<f64>,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Child generator for a tagged component.
    pub fn derived(seed: u64, tag: &str) -> Self {
        Self::new(derive_seed(seed, tag))
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform integer in `[0, bound)`.
    pub fn below(&mut self, bound: usize) -> usize {
        self.inner.random_range(0..bound)
    }

    /// Standard normal draw (polar method).
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let factor = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * factor);
                return u * factor;
            }
        }
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Serialized generator position: key, stream, word position and the
    /// cached polar-method spare.
    pub fn state_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(RNG_STATE_LEN);
        out.extend_from_slice(&self.inner.get_seed());
        out.extend_from_slice(&self.inner.get_stream().to_le_bytes());
        out.extend_from_slice(&self.inner.get_word_pos().to_le_bytes());
        match self.spare {
            Some(z) => {
                out.push(1);
                out.extend_from_slice(&z.to_bits().to_le_bytes());
            }
            None => {
                out.push(0);
                out.extend_from_slice(&[0u8; 8]);
            }
        }
        out
    }

    pub fn from_state_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != RNG_STATE_LEN {
            return Err(Error::invalid(format!(
                "rng state must be {RNG_STATE_LEN} bytes, got {}",
                bytes.len()
            )));
        }
        let mut key = [0u8; 32];
        key.copy_from_slice(&bytes[..32]);
        let stream = u64::from_le_bytes(bytes[32..40].try_into().unwrap());
        let word_pos = u128::from_le_bytes(bytes[40..56].try_into().unwrap());
        let spare = match bytes[56] {
            0 => None,
            1 => Some(f64::from_bits(u64::from_le_bytes(
                bytes[57..65].try_into().unwrap(),
            ))),
            flag => return Err(Error::invalid(format!("bad rng spare flag {flag}"))),
        };
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(stream);
        inner.set_word_pos(word_pos);
        Ok(Self { inner, spare })
    }
}
