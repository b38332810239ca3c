//! Seedable, splittable random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream keyed by the
//! global seed plus a short list of coordinates (day index, restart index,
//! node of the division tree, retry attempt). Streams for different keys are
//! independent, and the same key always reproduces the same stream regardless
//! of scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags that keep streams for unrelated purposes apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Day = 1,
    Split = 2,
    KMeans = 3,
    Validation = 4,
    Trial = 5,
    Location = 6,
}

/// Returns the stream for `(seed, tag, keys)`; at most three keys are used.
pub fn substream(seed: u64, tag: Stream, keys: &[u64]) -> ChaCha8Rng {
    debug_assert!(keys.len() <= 3, "substream takes at most three keys");
    let mut material = [0u8; 32];
    material[..8].copy_from_slice(&seed.to_le_bytes());
    for (i, k) in keys.iter().take(3).enumerate() {
        let off = 8 * (i + 1);
        material[off..off + 8].copy_from_slice(&k.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(material);
    rng.set_stream(tag as u64 | ((keys.len() as u64) << 8));
    rng
}
