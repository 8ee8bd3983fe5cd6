//! Channel-resolved link budget shared by every evaluator and solver.
//!
//! For device `(k, u, s)` with cell power `P_k` and WPT time `τ_k`:
//!
//! * harvested energy  `E = harvest · τ_k · P_k` with `harvest = η α² ‖h‖²`
//!   (or `η α² ϖ` under imperfect CSI),
//! * uplink power      `p = E / (T − τ_k)`,
//! * received signal   `p · gain` with `gain = α² ‖h‖² / M_k`,
//! * estimation noise  `p · est_noise` with `est_noise = α² σe²`.
//!
//! The uplink gain is normalized per antenna; the array gain enters through
//! the `(1 + ln(M/N)) N` factor of the rate law.

use crate::channel::{self, ChannelSet};
use crate::config::{AccessMode, CsiMode, NetworkConfig, PowerModel, SolverSettings};
use crate::error::Result;
use crate::grid::{Dims, Grid3};
use crate::metrics::decoding_order;

/// Which variables the optimizers may move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controls {
    pub antenna_selection: bool,
    pub fixed_power: Option<f64>,
    pub fixed_wpt_time: Option<f64>,
}

impl Default for Controls {
    fn default() -> Self {
        Self {
            antenna_selection: true,
            fixed_power: None,
            fixed_wpt_time: None,
        }
    }
}

impl From<&SolverSettings> for Controls {
    fn from(s: &SolverSettings) -> Self {
        Self {
            antenna_selection: s.antenna_selection,
            fixed_power: s.fixed_power,
            fixed_wpt_time: s.fixed_wpt_time,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub dims: Dims,
    pub antennas: Vec<usize>,
    pub block: f64,
    pub subcarrier_bandwidth: f64,
    pub noise: f64,
    pub bs_max_power: f64,
    pub user_max_power: f64,
    /// bit/s/Hz
    pub min_rate: f64,
    pub power_model: PowerModel,
    pub access: AccessMode,
    pub csi: CsiMode,
    pub error_variance: f64,
    pub alpha: Vec<Vec<f64>>,
    pub harvest: Grid3<f64>,
    pub gain: Grid3<f64>,
    pub est_noise: Grid3<f64>,
    /// `order[k][s]`: devices in SIC decoding order.
    pub order: Vec<Vec<Vec<usize>>>,
    pub controls: Controls,
}

impl Scenario {
    /// Generates channels from the config seed and resolves the link budget.
    pub fn build(config: &NetworkConfig) -> Result<Self> {
        let ch = channel::generate_channels(config)?;
        Self::from_channels(config, &ch)
    }

    pub fn from_channels(config: &NetworkConfig, channels: &ChannelSet) -> Result<Self> {
        config.validate()?;
        let dims = channels.dims();
        let sigma = config.effective_error_variance();
        let alpha: Vec<Vec<f64>> = channel::device_distances(config)
            .iter()
            .map(|row| row.iter().map(|d| config.path_loss.coefficient(*d)).collect())
            .collect();
        let eta = config.conversion_efficiency;

        let (harvest_norm, uplink_norm) = match config.csi {
            CsiMode::Perfect => {
                let g = channels.gains();
                (g.clone(), g)
            }
            CsiMode::Imperfect => {
                let est = channel::estimate_channels(channels, sigma)?;
                let mut w = Grid3::filled(dims, 0.0);
                for ((k, u, s), v) in est.h_hat.iter() {
                    w[(k, u, s)] = channel::degradation_coefficient(v, sigma)?;
                }
                (w, est.gains())
            }
        };
        let a2 = |k: usize, u: usize| alpha[k][u] * alpha[k][u];
        let harvest = Grid3::from_fn(dims, |k, u, s| eta * a2(k, u) * harvest_norm[(k, u, s)]);
        let gain = Grid3::from_fn(dims, |k, u, s| {
            a2(k, u) * uplink_norm[(k, u, s)] / config.antennas[k] as f64
        });
        let est_noise = Grid3::from_fn(dims, |k, u, _| a2(k, u) * sigma);
        let order = (0..dims.cells)
            .map(|k| {
                (0..dims.subcarriers)
                    .map(|s| {
                        let g: Vec<f64> = (0..dims.devices).map(|u| gain[(k, u, s)]).collect();
                        decoding_order(&g)
                    })
                    .collect()
            })
            .collect();

        Ok(Self {
            dims,
            antennas: config.antennas.clone(),
            block: config.block_duration,
            subcarrier_bandwidth: config.subcarrier_bandwidth(),
            noise: config.noise_variance,
            bs_max_power: config.bs_max_power,
            user_max_power: config.user_max_power,
            min_rate: config.min_rate,
            power_model: config.power_model,
            access: config.access,
            csi: config.csi,
            error_variance: sigma,
            alpha,
            harvest,
            gain,
            est_noise,
            order,
            controls: Controls::default(),
        })
    }

    pub fn with_controls(mut self, controls: Controls) -> Self {
        self.controls = controls;
        self
    }

    /// Largest admissible WPT time, kept off the `T` singularity.
    pub fn max_wpt_time(&self) -> f64 {
        self.block * (1.0 - 1e-6)
    }

    /// Rate floor in bit/s on one subcarrier.
    pub fn min_rate_bps(&self) -> f64 {
        self.min_rate * self.subcarrier_bandwidth
    }

    /// Position of device `u` in the decoding order of `(k, s)`.
    pub fn rank(&self, k: usize, s: usize, u: usize) -> usize {
        self.order[k][s].iter().position(|v| *v == u).unwrap()
    }
}
