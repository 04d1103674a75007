//! Reproducible random streams for Monte Carlo shots.
//!
//! Every shot draws from its own ChaCha8 stream, keyed by the experiment seed
//! and a purpose tag, with the shot index as the stream id. Results therefore
//! do not depend on how shots are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Factory for per-shot random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    key: [u8; 32],
}

impl StreamKey {
    /// `tag` separates independent uses of one seed (e.g. shot sampling vs
    /// bootstrap resampling).
    pub fn new(seed: u64, tag: &str) -> Self {
        let mut h = splitmix64(seed);
        for b in tag.bytes() {
            h = splitmix64(h ^ u64::from(b));
        }
        let mut key = [0u8; 32];
        for (i, chunk) in key.chunks_mut(8).enumerate() {
            h = splitmix64(h ^ i as u64);
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        Self { key }
    }

    /// Derived key for a sub-experiment (e.g. one RB length).
    pub fn child(&self, index: u64) -> Self {
        let mut h = u64::from_le_bytes(self.key[..8].try_into().unwrap());
        h = splitmix64(h ^ splitmix64(index));
        let mut key = self.key;
        for (i, chunk) in key.chunks_mut(8).enumerate() {
            h = splitmix64(h ^ u64::from_le_bytes(chunk.try_into().unwrap()) ^ i as u64);
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        Self { key }
    }

    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        rng
    }
}
