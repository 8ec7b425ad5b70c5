//! Seed derivation.
//!
//! Every random quantity in the toolkit is drawn from a generator seeded by
//! [`derive_seed`], a counter-based split of a master seed. A derived seed
//! depends only on `(parent, stream, index)`, so adding a consumer never
//! shifts the draws of another one and per-item work can run in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for item `index` of `stream` under `parent`.
pub fn derive_seed(parent: u64, stream: u64, index: u64) -> u64 {
    let a = splitmix64(parent ^ 0x5851_F42D_4C95_7F2D);
    let b = splitmix64(a ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix64(b ^ index.wrapping_mul(0xA076_1D64_78BD_642F))
}

/// Stream tag from a short ASCII label (up to eight bytes are significant).
pub const fn tag(label: &str) -> u64 {
    let bytes = label.as_bytes();
    let mut out = 0u64;
    let mut i = 0;
    while i < bytes.len() && i < 8 {
        out |= (bytes[i] as u64) << (8 * i);
        i += 1;
    }
    out
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
