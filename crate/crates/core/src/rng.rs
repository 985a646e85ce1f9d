//! Reproducible random streams.
//!
//! Every Monte Carlo trial draws from substreams keyed by
//! `(master seed, trial index, tag)`, so results do not depend on the order in
//! which trials are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Substream tags. Each consumer of randomness in a trial gets its own tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Info = 1,
    Channel = 2,
    Training = 3,
    Mismatch = 4,
    Ring = 5,
    Awgn = 6,
}

/// SplitMix64 generator. Also used for the interleaver shuffle, whose output
/// must be stable across implementations.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// Derives a 64-bit seed from a master seed and a sequence of keys.
pub fn derive_seed(master: u64, keys: &[u64]) -> u64 {
    let mut sm = SplitMix64::new(master);
    let mut acc = sm.next_u64();
    for &k in keys {
        sm = SplitMix64::new(acc ^ k.wrapping_mul(0xD1B5_4A32_D192_ED03));
        acc = sm.next_u64();
    }
    acc
}

/// ChaCha8 stream for one `(master, trial, tag)` triple.
pub fn substream(master: u64, trial: u64, tag: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, &[trial, tag as u64]))
}

/// Like [`substream`] with an extra key (grid point, sub-packet, ...).
pub fn substream_keyed(master: u64, trial: u64, tag: Stream, key: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, &[trial, tag as u64, key]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn splitmix_reference_values() {
        // Reference output of SplitMix64 seeded with 0.
        let mut sm = SplitMix64::new(0);
        assert_eq!(sm.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(sm.next_u64(), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn substreams_are_reproducible_and_distinct() {
        let a: u64 = substream(7, 3, Stream::Channel).random();
        let b: u64 = substream(7, 3, Stream::Channel).random();
        let c: u64 = substream(7, 4, Stream::Channel).random();
        let d: u64 = substream(7, 3, Stream::Info).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
