//! Seeded pseudo-random streams.
//!
//! Every stochastic step (weight init, shuffling, dropout masks, validation
//! sampling, synthetic data) draws from xoshiro256++ seeded through
//! SplitMix64 (`Xoshiro256PlusPlus::seed_from_u64`). The same seed gives the
//! same stream on every platform. Independent streams for folds, epochs and
//! grid points come from [`derive_seed`].

use rand::SeedableRng;
pub use rand_xoshiro::Xoshiro256PlusPlus as Rng;

/// Seed used for model initialization unless configured otherwise.
pub const DEFAULT_SEED: u64 = 7;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Mixes `stream` into `base` with the SplitMix64 finalizer, giving a
/// well-spread seed for a sub-stream.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw in `[lo, hi)`.
pub fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    use rand::RngExt;
    lo + (hi - lo) * rng.random::<f64>()
}

/// Standard normal draw (Box-Muller; one value per call).
pub fn normal(rng: &mut Rng) -> f64 {
    use rand::RngExt;
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
}
