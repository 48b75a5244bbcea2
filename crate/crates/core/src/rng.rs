//! Counter-based, splittable random streams.
//!
//! A [`RngStream`] is identified by a seed and a path of 64-bit labels
//! (for example chain, iteration, time step, particle). Deriving a child is a
//! pure function of the parent, so the draws a particle sees depend only on
//! its position in that hierarchy and never on the order in which worker
//! threads happen to run.

use rand_core::{impls, RngCore};
use rand_distr::{Distribution, StandardNormal};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const SEED_SALT: u64 = 0x6A09_E667_F3BC_C909;
const CHILD_SALT: u64 = 0xBB67_AE85_84CA_A73B;
const LABEL_SALT: u64 = 0x3C6E_F372_FE94_F82B;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    key: u64,
    depth: u32,
    counter: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            key: mix64(seed ^ SEED_SALT),
            depth: 0,
            counter: 0,
        }
    }

    /// Derives the stream at `self.path ++ [index]`. The parent is left untouched.
    pub fn child(&self, index: u64) -> Self {
        let label = mix64(index.wrapping_mul(GOLDEN_GAMMA).wrapping_add(LABEL_SALT));
        Self {
            seed: self.seed,
            key: mix64(mix64(self.key ^ CHILD_SALT).wrapping_add(label)),
            depth: self.depth + 1,
            counter: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Length of the derivation path below the root seed.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform draw on `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw on the open interval `(0, 1)`.
    #[inline]
    pub fn uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        (RngStream::next_u64(self) >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        RngStream::next_u64(self)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        impls::fill_bytes_via_next(self, dst)
    }
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
