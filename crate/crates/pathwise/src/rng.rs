//! Named splittable random streams.
//!
//! Every random draw in the crate flows from a master seed through
//! [`child_rng`]: the child stream is identified by `(master, purpose, index)`
//! and is independent of scheduling, so parallel and sequential runs consume
//! identical randomness. The key derivation is SplitMix64 applied to the
//! master seed xored with an FNV-1a hash of the purpose tag; the index selects
//! the ChaCha stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the deterministic child stream for `(master, purpose, index)`.
pub fn child_rng(master: u64, purpose: &str, index: u64) -> ChaCha8Rng {
    let mut state = master ^ fnv1a(purpose.as_bytes());
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
