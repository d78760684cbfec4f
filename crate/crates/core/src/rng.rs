//! Deterministic random substreams.
//!
//! Every random draw in the simulator comes from a ChaCha8 stream selected by
//! an [`RngStreamKey`]: the run seed keys the cipher, and the remaining key
//! fields are mixed into the 64-bit stream id. Draws therefore depend only on
//! the key, never on execution order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derivation key for one substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStreamKey {
    pub seed: u64,
    pub context: u64,
    pub iteration: u64,
    pub probe: u64,
}

impl RngStreamKey {
    pub fn new(seed: u64, context: u64) -> Self {
        RngStreamKey { seed, context, iteration: 0, probe: 0 }
    }

    pub fn at(self, iteration: u64, probe: u64) -> Self {
        RngStreamKey { iteration, probe, ..self }
    }

    pub fn with_probe(self, probe: u64) -> Self {
        RngStreamKey { probe, ..self }
    }

    pub fn stream_id(&self) -> u64 {
        let mut h = splitmix64(self.context);
        h = splitmix64(h ^ self.iteration);
        splitmix64(h ^ self.probe.rotate_left(32))
    }

    pub fn stream(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id());
        rng
    }
}

/// Stable 64-bit tag for a textual context label (FNV-1a).
pub fn context_tag(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
