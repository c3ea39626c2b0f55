//! Keyed random streams.
//!
//! Every draw made by the particle engine comes from a ChaCha8 stream whose key is
//! `(seed, time, particle, purpose)`. ChaCha is itself a counter-based generator, so
//! the k-th draw of a stream is a pure function of the key and k. Nothing is shared
//! between particles, which makes results independent of how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Part of the key, so that e.g. the selection and
/// mutation draws of the same particle never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Init = 1,
    Select = 2,
    Mutate = 3,
    Mcmc = 4,
    Backward = 5,
    User = 6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The generator for key `(seed, time, index, purpose)`.
    pub fn stream(&self, time: usize, index: usize, purpose: Purpose) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&(time as u64).to_le_bytes());
        key[16..24].copy_from_slice(&(index as u64).to_le_bytes());
        key[24..32].copy_from_slice(&(purpose as u64).to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }

    /// An independent sub-seed, used to derive replicate seeds in ensembles.
    pub fn derive(&self, salt: u64) -> RngStream {
        RngStream::new(splitmix64(self.seed ^ splitmix64(salt)))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
