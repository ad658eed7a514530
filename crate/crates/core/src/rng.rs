//! Seeded, splittable random streams.
//!
//! Every stream is a PCG-XSL-RR 128/64 generator (`rand_pcg::Pcg64`). Child
//! streams are derived from the parent's *seed*, not its current state, so
//! forking is independent of how many draws the parent has made.

use rand::{RngCore, SeedableRng};
use rand_pcg::Pcg64;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: Pcg64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: Pcg64::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives an independent child stream labelled by `label`.
    pub fn fork(&self, label: u64) -> Self {
        Self::new(splitmix64(
            self.seed ^ splitmix64(label.wrapping_add(0x6a09_e667_f3bc_c909)),
        ))
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
