//! Seeded random streams.
//!
//! Every draw comes from a `ChaCha8Rng` seeded with the scenario seed. Each
//! `(domain, index)` pair selects its own ChaCha stream through
//! `set_stream((domain << 48) | index)`, so a channel entry does not depend
//! on how many other entries were generated before it, and results are
//! identical on every platform.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Independent stream families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Channel = 1,
    EstimationError = 2,
    Placement = 3,
    MonteCarlo = 4,
}

/// Returns the generator for stream `index` of `domain`.
pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    debug_assert!(index < (1 << 48));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 48) | index);
    rng
}

/// One draw from CN(0, variance): real and imaginary parts each carry half.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let sd = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(sd * re, sd * im)
}
