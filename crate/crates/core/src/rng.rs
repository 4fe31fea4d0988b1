//! Deterministic random streams.
//!
//! Every stream is a xoshiro256++ generator whose 256-bit state is expanded
//! from a 64-bit seed with SplitMix64 (the reference seeding procedure of the
//! xoshiro authors). Both algorithms use only integer arithmetic, so a seed
//! yields the same stream on every platform.
//!
//! Per-item streams are derived from a master seed and a tuple of counters
//! with [`derive_seed`], so work can be split across threads in any order
//! without changing any sampled value.

use rand::{Rng, RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::geometry::Vec3;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function (Stafford variant 13).
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a sequence of counters into a 64-bit seed.
///
/// Each step is `h ← mix64(h ⊕ mix64(x + (i+1)·γ))` with γ the SplitMix64
/// increment, so both the values and their positions matter.
pub fn derive_seed(master: u64, counters: &[u64]) -> u64 {
    let mut h = mix64(master.wrapping_add(GOLDEN_GAMMA));
    for (i, &x) in counters.iter().enumerate() {
        let salt = GOLDEN_GAMMA.wrapping_mul(i as u64 + 1);
        h = mix64(h ^ mix64(x.wrapping_add(salt)));
    }
    h
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeededRng {
    inner: Xoshiro256PlusPlus,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    /// Stream for one `(traj, t, copy, attempt)` work item of an augmentation run.
    pub fn derive(master_seed: u64, traj: u64, t: u64, copy: u64, attempt: u64) -> Self {
        Self::new(derive_seed(master_seed, &[traj, t, copy, attempt]))
    }

    pub fn from_counters(master_seed: u64, counters: &[u64]) -> Self {
        Self::new(derive_seed(master_seed, counters))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn normal(&mut self, mean: f64, sigma: f64) -> f64 {
        mean + sigma * self.standard_normal()
    }

    /// Uniform direction on the unit sphere (Archimedes' projection).
    pub fn unit_vector(&mut self) -> Vec3 {
        let z = self.uniform_range(-1.0, 1.0);
        let phi = self.uniform_range(0.0, std::f64::consts::TAU);
        let rho = (1.0 - z * z).max(0.0).sqrt();
        Vec3::new(rho * phi.cos(), rho * phi.sin(), z)
    }
}

impl RngCore for SeededRng {
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
