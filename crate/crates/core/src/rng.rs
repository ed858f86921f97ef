//! Keyed random streams.
//!
//! A sample's randomness is a pure function of `(seed, index, lane)`: the seed
//! and lane select a ChaCha key, the sample index selects the ChaCha stream.
//! No state is shared between samples, so output does not depend on worker
//! count or scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SampleRng = ChaCha8Rng;

/// Independent purposes a sample draws randomness for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lane {
    /// Target text selection; fixed across visibility retries.
    Text,
    /// Everything rendered for the given attempt (0-based).
    Attempt(u32),
}

impl Lane {
    fn id(self) -> u64 {
        match self {
            Lane::Text => 1,
            Lane::Attempt(n) => 0x1_0000_0000 | n as u64,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, index: u64, lane: Lane) -> SampleRng {
    let mut state = seed ^ lane.id().wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
