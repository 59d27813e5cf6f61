//! Seeded coin-flip streams.
//!
//! A stream is `ChaCha8Rng::seed_from_u64(master_seed)` with its ChaCha
//! stream word set to `substream_id`. The phase engine derives substream
//! ids as `(phase << 32) | invocation`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name recorded in run metadata so a report can be replayed.
pub const RNG_ID: &str = "rand_chacha-0.9/ChaCha8Rng(seed_from_u64(master_seed), set_stream(substream_id))";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub master_seed: u64,
    pub substream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, substream_id: u64) -> Self {
        RngStream {
            master_seed,
            substream_id,
        }
    }

    pub fn for_invocation(master_seed: u64, phase: u32, invocation: u32) -> Self {
        RngStream::new(master_seed, (u64::from(phase) << 32) | u64::from(invocation))
    }

    pub fn generator(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.substream_id);
        rng
    }
}
