//! Deterministic random streams.
//!
//! Every consumer derives its own ChaCha stream from a 64-bit master seed
//! and a key path such as `(iteration, gap)`. Streams depend only on the
//! master seed and the key, never on scheduling, so parallel and sequential
//! runs produce the same draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A master seed from which independent substreams are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedTree {
    root: u64,
}

impl SeedTree {
    pub const fn new(master: u64) -> Self {
        Self { root: master }
    }

    pub fn master(&self) -> u64 {
        self.root
    }

    /// Child node keyed by `key`.
    pub fn child(&self, key: u64) -> Self {
        Self {
            root: splitmix64(self.root ^ splitmix64(key.wrapping_add(0x5851_f42d_4c95_7f2d))),
        }
    }

    /// Child node keyed by a path of keys.
    pub fn descend(&self, keys: &[u64]) -> Self {
        keys.iter().fold(*self, |node, &k| node.child(k))
    }

    /// The random stream at this node.
    pub fn rng(&self) -> SimRng {
        let mut seed = [0u8; 32];
        let mut z = self.root;
        for chunk in seed.chunks_mut(8) {
            z = splitmix64(z);
            chunk.copy_from_slice(&z.to_le_bytes());
        }
        SimRng::from_seed(seed)
    }

    /// Shorthand for `descend(keys).rng()`.
    pub fn stream(&self, keys: &[u64]) -> SimRng {
        self.descend(keys).rng()
    }
}

/// Stable numeric key for a string label (FNV-1a).
pub fn label_key(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}
