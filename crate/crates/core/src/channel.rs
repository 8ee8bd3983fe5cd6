//! Rayleigh channels, MMSE-style estimates, MRT beams and WPT harvest.

use crate::config::{NetworkConfig, Placement};
use crate::error::{Error, Result};
use crate::grid::{Dims, Grid3};
use crate::rng::{self, Domain};
use num_complex::Complex64;
use rand::Rng;

pub type CVector = Vec<Complex64>;

pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// True downlink channels `h[k][u][s]`, each of length M_k.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub seed: u64,
    pub h: Grid3<CVector>,
}

impl ChannelSet {
    pub fn dims(&self) -> Dims {
        self.h.dims()
    }

    /// ‖h‖² per entry.
    pub fn gains(&self) -> Grid3<f64> {
        self.h.map(|v| norm_sqr(v))
    }
}

/// Estimates `ĥ = h − e` with `e ~ CN(0, σe² I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedChannelSet {
    pub error_variance: f64,
    pub h_hat: Grid3<CVector>,
}

impl EstimatedChannelSet {
    pub fn gains(&self) -> Grid3<f64> {
        self.h_hat.map(|v| norm_sqr(v))
    }
}

/// Draws every entry i.i.d. CN(0, 1); stream `(k, u, s)` feeds vector `(k, u, s)`.
pub fn generate_channels(config: &NetworkConfig) -> Result<ChannelSet> {
    config.validate()?;
    let dims = Dims::new(config.cells, config.devices, config.subcarriers);
    let h = Grid3::from_fn(dims, |k, u, s| {
        let mut r = rng::stream(config.rng_seed, Domain::Channel, dims.index(k, u, s) as u64);
        (0..config.antennas[k])
            .map(|_| rng::complex_gaussian(&mut r, 1.0))
            .collect()
    });
    Ok(ChannelSet {
        seed: config.rng_seed,
        h,
    })
}

pub fn estimate_channels(channels: &ChannelSet, error_variance: f64) -> Result<EstimatedChannelSet> {
    if !(error_variance >= 0.0) || !error_variance.is_finite() {
        return Err(Error::Domain(format!(
            "estimation error variance must be >= 0, got {error_variance}"
        )));
    }
    let dims = channels.dims();
    let h_hat = Grid3::from_fn(dims, |k, u, s| {
        let h = channels.h.get(k, u, s);
        if error_variance == 0.0 {
            return h.clone();
        }
        let mut r = rng::stream(
            channels.seed,
            Domain::EstimationError,
            dims.index(k, u, s) as u64,
        );
        h.iter()
            .map(|z| z - rng::complex_gaussian(&mut r, error_variance))
            .collect()
    });
    Ok(EstimatedChannelSet {
        error_variance,
        h_hat,
    })
}

/// MRT direction `h / ‖h‖`.
pub fn beamforming_vector(h: &[Complex64]) -> Result<CVector> {
    let n = norm_sqr(h).sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::DegenerateChannel);
    }
    Ok(h.iter().map(|z| z / n).collect())
}

/// `|bᴴh|²`.
pub fn matched_gain(b: &[Complex64], h: &[Complex64]) -> f64 {
    b.iter()
        .zip(h)
        .map(|(bi, hi)| bi.conj() * hi)
        .sum::<Complex64>()
        .norm_sqr()
}

fn check_time(tau: f64, block: f64) -> Result<()> {
    if !(0.0..=block).contains(&tau) {
        return Err(Error::Domain(format!("WPT time {tau} outside [0, {block}]")));
    }
    Ok(())
}

/// Energy harvested in the WPT phase with the beam matched to `h`.
pub fn harvested_energy_perfect(
    h: &[Complex64],
    alpha: f64,
    power: f64,
    tau: f64,
    eta: f64,
    block: f64,
) -> Result<f64> {
    check_time(tau, block)?;
    let g = match beamforming_vector(h) {
        Ok(b) => matched_gain(&b, h),
        Err(_) => 0.0,
    };
    Ok(eta * tau * alpha * alpha * g * power)
}

/// ϖ = σe²/(1+σe²) + ‖ĥ‖²/(1+σe²)².
pub fn degradation_coefficient(h_hat: &[Complex64], error_variance: f64) -> Result<f64> {
    if !(error_variance >= 0.0) {
        return Err(Error::Domain(format!(
            "estimation error variance must be >= 0, got {error_variance}"
        )));
    }
    let q = 1.0 + error_variance;
    Ok(error_variance / q + norm_sqr(h_hat) / (q * q))
}

pub fn harvested_energy_imperfect(
    h_hat: &[Complex64],
    alpha: f64,
    power: f64,
    tau: f64,
    eta: f64,
    error_variance: f64,
    block: f64,
) -> Result<f64> {
    check_time(tau, block)?;
    let w = degradation_coefficient(h_hat, error_variance)?;
    Ok(eta * tau * alpha * alpha * w * power)
}

/// Distance of every device to its BS, `[k][u]`.
pub fn device_distances(config: &NetworkConfig) -> Vec<Vec<f64>> {
    match &config.placement {
        Placement::Fixed(rows) => rows.clone(),
        Placement::Uniform { min_distance } => (0..config.cells)
            .map(|k| {
                (0..config.devices)
                    .map(|u| {
                        let idx = (k * config.devices + u) as u64;
                        let mut r = rng::stream(config.rng_seed, Domain::Placement, idx);
                        let x: f64 = r.random();
                        let (a, b) = (min_distance * min_distance, config.cell_radius.powi(2));
                        (a + x * (b - a)).sqrt()
                    })
                    .collect()
            })
            .collect(),
    }
}
