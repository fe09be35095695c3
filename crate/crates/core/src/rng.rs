//! Counter-based random streams.
//!
//! Every particle of every tree gets its own ChaCha8 stream whose key is
//! `(run seed, sample index, label key)`. The label key is a hash of the
//! particle's path from the root, so the random numbers a particle consumes
//! do not depend on the order in which particles or samples are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const ROOT_LABEL: u64 = 0x6a09_e667_f3bc_c909;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash of a particle label (path of child indices from the root).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabelKey(u64);

impl LabelKey {
    pub fn root() -> Self {
        LabelKey(ROOT_LABEL)
    }

    pub fn child(self, index: usize) -> Self {
        LabelKey(splitmix64(
            self.0.rotate_left(17) ^ splitmix64(index as u64 + 1),
        ))
    }

    pub fn value(self) -> u64 {
        self.0
    }
}

/// Identifies one independent sample (one tree) within a seeded run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleStream {
    pub seed: u64,
    pub sample: u64,
}

impl SampleStream {
    pub fn new(seed: u64, sample: u64) -> Self {
        SampleStream { seed, sample }
    }

    pub fn rng(self, label: LabelKey) -> StreamRng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.sample.to_le_bytes());
        key[16..24].copy_from_slice(&label.value().to_le_bytes());
        key[24..32].copy_from_slice(&0x6272_616e_6368_7064u64.to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }

    pub fn root_rng(self) -> StreamRng {
        self.rng(LabelKey::root())
    }
}

/// Convenience for tests and one-off samplers: a stream keyed by seed alone.
pub fn seeded(seed: u64) -> StreamRng {
    SampleStream::new(seed, u64::MAX).root_rng()
}
