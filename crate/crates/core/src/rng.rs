//! Counter-based random streams.
//!
//! A [`Stream`] is a SplitMix64 sequence whose 64-bit key is derived from a
//! path of coordinates such as `(seed, replicate, generation, individual)`.
//! Draws depend only on the path, never on which worker evaluates it, so
//! results are identical for any thread count.

use rand::rand_core::impls::fill_bytes_via_next;
use rand::RngCore;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const FORK: u64 = 0xD1B5_4A32_D192_ED03;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit FNV-1a hash, used to turn tags into stream coordinates.
pub fn tag_hash(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stream {
    key: u64,
    counter: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self {
            key: mix64(seed ^ 0x5EED_5EED_5EED_5EED),
            counter: 0,
        }
    }

    /// Stream for a named estimator: `(seed, tag)`.
    pub fn for_tag(seed: u64, tag: &str) -> Self {
        Self::new(seed).fork(tag_hash(tag))
    }

    /// Child stream keyed by `index`. Forking does not advance `self`.
    pub fn fork(&self, index: u64) -> Self {
        let k = mix64(self.key.wrapping_add(FORK));
        Self {
            key: mix64(k ^ mix64(index.wrapping_mul(GOLDEN).wrapping_add(FORK))),
            counter: 0,
        }
    }

    /// Child stream keyed by a coordinate path.
    pub fn at(&self, path: &[u64]) -> Self {
        path.iter().fold(self.clone(), |s, &i| s.fork(i))
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }
}

impl RngCore for Stream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        fill_bytes_via_next(self, dst)
    }
}
