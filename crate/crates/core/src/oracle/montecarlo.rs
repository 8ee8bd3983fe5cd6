//! Monte Carlo checks of the antenna-selection rate law.
//!
//! With `M` i.i.d. unit-exponential gains, the sum of the `N` largest is
//! asymptotically normal with mean `N(1 + ln(M/N))` and variance
//! `N(2 − N/M)`.

use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use rand::Rng;
use rand_distr::Exp1;

pub const MIN_TRIALS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCheck {
    pub empirical_mean: f64,
    pub empirical_variance: f64,
    pub reference_mean: f64,
    pub reference_variance: f64,
}

impl MomentCheck {
    pub fn mean_gap(&self) -> f64 {
        (self.empirical_mean - self.reference_mean).abs() / self.reference_mean
    }

    pub fn variance_gap(&self) -> f64 {
        (self.empirical_variance - self.reference_variance).abs() / self.reference_variance
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCheck {
    pub empirical_mean: f64,
    pub reference_location: f64,
}

impl RateCheck {
    pub fn gap(&self) -> f64 {
        (self.empirical_mean - self.reference_location).abs() / self.reference_location
    }
}

fn validate(m: usize, n: usize, trials: usize) -> Result<()> {
    if n < 1 || n > m {
        return Err(Error::Domain(format!("need 1 <= N <= M, got N={n}, M={m}")));
    }
    if trials < MIN_TRIALS {
        return Err(Error::Domain(format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    Ok(())
}

/// Calls `visit` with the top-`n` sum of each trial, in trial order.
fn trimmed_sums(m: usize, n: usize, trials: usize, seed: u64, mut visit: impl FnMut(f64)) {
    let mut r = rng::stream(seed, Domain::MonteCarlo, ((m as u64) << 20) | n as u64);
    let mut buf = vec![0.0f64; m];
    for _ in 0..trials {
        for v in buf.iter_mut() {
            *v = r.sample(Exp1);
        }
        let sum: f64 = if n == m {
            buf.iter().sum()
        } else {
            buf.select_nth_unstable_by(m - n, f64::total_cmp);
            buf[m - n..].iter().sum()
        };
        visit(sum);
    }
}

pub fn trimmed_sum_distribution_check(m: usize, n: usize, trials: usize, seed: u64) -> Result<MomentCheck> {
    validate(m, n, trials)?;
    // Welford.
    let (mut count, mut mean, mut m2) = (0.0f64, 0.0f64, 0.0f64);
    trimmed_sums(m, n, trials, seed, |x| {
        count += 1.0;
        let d = x - mean;
        mean += d / count;
        m2 += d * (x - mean);
    });
    let (mf, nf) = (m as f64, n as f64);
    Ok(MomentCheck {
        empirical_mean: mean,
        empirical_variance: m2 / (count - 1.0),
        reference_mean: nf * (1.0 + (mf / nf).ln()),
        reference_variance: nf * (2.0 - nf / mf),
    })
}

/// Mean of `log₂(1 + γ Σ top-N)` against `log₂(1 + (1 + ln(M/N)) γ N)`.
pub fn rate_distribution_check(m: usize, n: usize, gamma: f64, trials: usize, seed: u64) -> Result<RateCheck> {
    validate(m, n, trials)?;
    if !(gamma > 0.0) {
        return Err(Error::Domain("gamma must be > 0".into()));
    }
    let mut acc = 0.0;
    trimmed_sums(m, n, trials, seed, |x| acc += (1.0 + gamma * x).log2());
    let (mf, nf) = (m as f64, n as f64);
    Ok(RateCheck {
        empirical_mean: acc / trials as f64,
        reference_location: (1.0 + (1.0 + (mf / nf).ln()) * gamma * nf).log2(),
    })
}
