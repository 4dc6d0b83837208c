//! Counter-based random streams.
//!
//! Every random draw in the engine comes from a ChaCha8 stream addressed by
//! `(seed, domain, index)`. The seed and domain select the key, the index
//! selects the 64-bit stream id, so path `r` of a batch sees the same numbers
//! regardless of how many other paths exist or in which order they run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Distinct domains never share a key for the same seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    /// Base sampling of a full path (cells and jump atoms).
    Path,
    /// Conditional refinement of one stored Gaussian cell.
    Refine,
    /// Anything the verification suites need beyond paths.
    Auxiliary,
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::Path => 0x5041_5448,
            Domain::Refine => 0x5245_464e,
            Domain::Auxiliary => 0x4155_5849,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Key derivation: mixes seed, domain and an optional sub-key into a 256-bit
/// ChaCha key.
fn key(seed: u64, domain: Domain, subkey: u64) -> [u8; 32] {
    let mut out = [0u8; 32];
    let mut state = splitmix64(seed ^ domain.tag().rotate_left(17)) ^ splitmix64(subkey);
    for chunk in out.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    out
}

/// The stream for item `index` of `domain` under `seed`.
pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    keyed_stream(seed, domain, 0, index)
}

/// Like [`stream`] but with a second key component, used when an item is
/// addressed by two coordinates (path index and cell index).
pub fn keyed_stream(seed: u64, domain: Domain, subkey: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key(seed, domain, subkey));
    rng.set_stream(index);
    rng
}
