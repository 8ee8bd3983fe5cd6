//! Scenario description and its TOML loader.
//!
//! All quantities are SI. Any power key may instead be given with a `_dbm`
//! suffix (`bs_max_power_dbm = 46`), converted with `10^((dBm - 30) / 10)`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Converts dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessMode {
    Noma,
    Oma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsiMode {
    Perfect,
    Imperfect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Admm,
    Oracle,
}

/// Large-scale amplitude coefficient α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PathLoss {
    /// α(d) = α₀ · (d / d₀)^(−ν/2).
    Distance {
        reference_distance: f64,
        reference_coefficient: f64,
        exponent: f64,
    },
    Constant(f64),
}

impl PathLoss {
    pub fn coefficient(&self, distance: f64) -> f64 {
        match *self {
            PathLoss::Constant(a) => a,
            PathLoss::Distance {
                reference_distance,
                reference_coefficient,
                exponent,
            } => reference_coefficient * (distance / reference_distance).powf(-exponent / 2.0),
        }
    }
}

impl Default for PathLoss {
    fn default() -> Self {
        PathLoss::Distance {
            reference_distance: 75.0,
            reference_coefficient: 1.0 / 75.0,
            exponent: 2.0,
        }
    }
}

/// Where devices sit relative to their serving BS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Placement {
    /// Explicit distances, one row per cell.
    Fixed(Vec<Vec<f64>>),
    /// Uniform over the annulus `[min_distance, cell_radius]` by area.
    Uniform { min_distance: f64 },
}

/// Per-antenna circuit power terms, in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    pub dac: f64,
    pub mix: f64,
    pub filt: f64,
    pub filr: f64,
    pub lna: f64,
    pub ifa: f64,
    pub adc: f64,
    pub syn: f64,
}

impl PowerModel {
    /// Transmit-side power per active BS antenna.
    pub fn bs(&self) -> f64 {
        self.dac + self.mix + self.filt
    }

    /// Receive-chain power charged per device.
    pub fn user(&self) -> f64 {
        self.syn + self.lna + self.mix + self.ifa + self.filr + self.adc
    }

    fn validate(&self) -> Result<()> {
        let all = [
            self.dac, self.mix, self.filt, self.filr, self.lna, self.ifa, self.adc, self.syn,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config("power model terms must be finite and >= 0".into()));
        }
        Ok(())
    }
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            dac: 10e-3,
            mix: 30.3e-3,
            filt: 2.5e-3,
            filr: 2.5e-3,
            lna: 20e-3,
            ifa: 3e-3,
            adc: 10e-3,
            syn: 50e-3,
        }
    }
}

/// Static scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub cells: usize,
    pub devices: usize,
    pub subcarriers: usize,
    /// Antenna budget M_k of every BS.
    pub antennas: Vec<usize>,
    pub cell_radius: f64,
    pub placement: Placement,
    pub path_loss: PathLoss,
    /// Receiver noise power σ² in watts.
    pub noise_variance: f64,
    pub csi: CsiMode,
    pub estimation_error_variance: f64,
    pub conversion_efficiency: f64,
    pub block_duration: f64,
    pub bandwidth: f64,
    pub rng_seed: u64,
    pub bs_max_power: f64,
    pub user_max_power: f64,
    /// Minimum spectral efficiency in bit/s/Hz.
    pub min_rate: f64,
    pub power_model: PowerModel,
    pub access: AccessMode,
}

impl NetworkConfig {
    /// Defaults from the reference parameter table with the given shape.
    pub fn with_shape(cells: usize, devices: usize, subcarriers: usize, antennas: usize) -> Self {
        Self {
            cells,
            devices,
            subcarriers,
            antennas: vec![antennas; cells],
            cell_radius: 500.0,
            placement: Placement::Fixed(vec![vec![75.0; devices]; cells]),
            path_loss: PathLoss::default(),
            noise_variance: 1e-9,
            csi: CsiMode::Perfect,
            estimation_error_variance: 0.0,
            conversion_efficiency: 0.8,
            block_duration: 1.0,
            bandwidth: 1.0,
            rng_seed: 42,
            bs_max_power: dbm_to_watts(46.0),
            user_max_power: dbm_to_watts(23.0),
            min_rate: 0.1,
            power_model: PowerModel::default(),
            access: AccessMode::Noma,
        }
    }

    /// Six cells, fifteen devices, twenty subcarriers, 64 antennas.
    pub fn six_cell() -> Self {
        Self::with_shape(6, 15, 20, 64)
    }

    pub fn subcarrier_bandwidth(&self) -> f64 {
        self.bandwidth / self.subcarriers as f64
    }

    /// Sets every device of every cell at `d` meters.
    pub fn set_uniform_distance(&mut self, d: f64) {
        self.placement = Placement::Fixed(vec![vec![d; self.devices]; self.cells]);
    }

    /// Error variance that actually enters the model.
    pub fn effective_error_variance(&self) -> f64 {
        match self.csi {
            CsiMode::Perfect => 0.0,
            CsiMode::Imperfect => self.estimation_error_variance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: &str| Err(Error::Config(m.to_string()));
        if self.cells == 0 || self.devices == 0 || self.subcarriers == 0 {
            return cfg("cells, devices and subcarriers must all be >= 1");
        }
        if self.antennas.len() != self.cells {
            return cfg("antennas must list one budget per cell");
        }
        if self.antennas.contains(&0) {
            return cfg("every antenna budget must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.conversion_efficiency) {
            return cfg("conversion_efficiency must lie in [0, 1]");
        }
        if !(self.noise_variance > 0.0) || !self.noise_variance.is_finite() {
            return cfg("noise_variance must be > 0");
        }
        if !(self.estimation_error_variance >= 0.0) {
            return cfg("estimation_error_variance must be >= 0");
        }
        if !(self.block_duration > 0.0) || !(self.bandwidth > 0.0) {
            return cfg("block_duration and bandwidth must be > 0");
        }
        if !(self.bs_max_power >= 0.0) || !(self.user_max_power >= 0.0) || !(self.min_rate >= 0.0)
        {
            return cfg("power limits and min_rate must be >= 0");
        }
        if !(self.cell_radius > 0.0) {
            return cfg("cell_radius must be > 0");
        }
        match &self.placement {
            Placement::Fixed(rows) => {
                if rows.len() != self.cells || rows.iter().any(|r| r.len() != self.devices) {
                    return cfg("distances must be a cells x devices matrix");
                }
                if rows.iter().flatten().any(|d| !(*d > 0.0)) {
                    return cfg("distances must be > 0");
                }
            }
            Placement::Uniform { min_distance } => {
                if !(*min_distance > 0.0) || *min_distance >= self.cell_radius {
                    return cfg("min_distance must lie in (0, cell_radius)");
                }
            }
        }
        if let PathLoss::Distance {
            reference_distance,
            reference_coefficient,
            exponent,
        } = self.path_loss
        {
            if !(reference_distance > 0.0) || !(reference_coefficient > 0.0) || !(exponent >= 0.0)
            {
                return cfg("path loss reference values must be positive");
            }
        }
        self.power_model.validate()
    }
}

/// Optimizer knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub kind: SolverKind,
    pub rho: f64,
    /// Dinkelbach tolerance on |R − ηE| and ADMM residual tolerance.
    pub epsilon: f64,
    pub max_outer: usize,
    pub max_iterations: usize,
    pub inner_tolerance: f64,
    pub inner_max_iterations: usize,
    /// When false every device uses all M_k antennas.
    pub antenna_selection: bool,
    pub fixed_power: Option<f64>,
    pub fixed_wpt_time: Option<f64>,
    pub oracle: OracleSettings,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            kind: SolverKind::Admm,
            rho: 0.088,
            epsilon: 1e-7,
            max_outer: 50,
            max_iterations: 100,
            inner_tolerance: 1e-6,
            inner_max_iterations: 500,
            antenna_selection: true,
            fixed_power: None,
            fixed_wpt_time: None,
            oracle: OracleSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleSettings {
    pub power_points: usize,
    pub time_points: usize,
    /// Zoom passes around the incumbent after the initial grid.
    pub refinements: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            power_points: 24,
            time_points: 24,
            refinements: 3,
        }
    }
}

/// A loaded configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub network: NetworkConfig,
    pub solver: SolverSettings,
}

impl Config {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses TOML text; `origin` labels errors.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let raw: RawFile = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        raw.resolve()
    }
}

// ---- raw file layout ----

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    network: Option<RawNetwork>,
    #[serde(default)]
    devices: RawDevices,
    #[serde(default)]
    path_loss: RawPathLoss,
    #[serde(default)]
    wpt: RawWpt,
    #[serde(default)]
    csi: RawCsi,
    #[serde(default)]
    limits: RawLimits,
    power_model: Option<RawPowerModel>,
    #[serde(default)]
    solver: RawSolver,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    cells: Option<usize>,
    devices: Option<usize>,
    subcarriers: Option<usize>,
    antennas: Option<Antennas>,
    bandwidth: Option<f64>,
    block_duration: Option<f64>,
    noise_variance: Option<f64>,
    noise_variance_dbm: Option<f64>,
    rng_seed: Option<u64>,
    access: Option<AccessMode>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Antennas {
    Same(usize),
    PerCell(Vec<usize>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDevices {
    cell_radius: Option<f64>,
    distance: Option<f64>,
    distances: Option<Vec<Vec<f64>>>,
    placement: Option<String>,
    min_distance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPathLoss {
    model: Option<String>,
    coefficient: Option<f64>,
    reference_distance: Option<f64>,
    reference_coefficient: Option<f64>,
    exponent: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWpt {
    efficiency: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCsi {
    mode: Option<CsiMode>,
    error_variance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLimits {
    bs_max_power: Option<f64>,
    bs_max_power_dbm: Option<f64>,
    user_max_power: Option<f64>,
    user_max_power_dbm: Option<f64>,
    min_rate: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPowerModel {
    dac: Option<f64>,
    dac_dbm: Option<f64>,
    mix: Option<f64>,
    mix_dbm: Option<f64>,
    filt: Option<f64>,
    filt_dbm: Option<f64>,
    filr: Option<f64>,
    filr_dbm: Option<f64>,
    lna: Option<f64>,
    lna_dbm: Option<f64>,
    ifa: Option<f64>,
    ifa_dbm: Option<f64>,
    adc: Option<f64>,
    adc_dbm: Option<f64>,
    syn: Option<f64>,
    syn_dbm: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    kind: Option<SolverKind>,
    rho: Option<f64>,
    epsilon: Option<f64>,
    max_outer: Option<usize>,
    max_iterations: Option<usize>,
    inner_tolerance: Option<f64>,
    inner_max_iterations: Option<usize>,
    antenna_selection: Option<bool>,
    fixed_power: Option<f64>,
    fixed_power_dbm: Option<f64>,
    fixed_wpt_time: Option<f64>,
    oracle_power_points: Option<usize>,
    oracle_time_points: Option<usize>,
    oracle_refinements: Option<usize>,
}

/// Picks the watt value or the converted dBm value; both at once is an error.
fn power(name: &str, watts: Option<f64>, dbm: Option<f64>) -> Result<Option<f64>> {
    match (watts, dbm) {
        (Some(_), Some(_)) => Err(Error::Config(format!(
            "`{name}` and `{name}_dbm` are mutually exclusive"
        ))),
        (Some(w), None) => Ok(Some(w)),
        (None, Some(d)) => Ok(Some(dbm_to_watts(d))),
        (None, None) => Ok(None),
    }
}

fn required<T>(name: &str, v: Option<T>) -> Result<T> {
    v.ok_or_else(|| Error::MissingField(name.to_string()))
}

impl RawFile {
    fn resolve(self) -> Result<Config> {
        let net = required("network", self.network)?;
        let cells = required("network.cells", net.cells)?;
        let devices = required("network.devices", net.devices)?;
        let subcarriers = required("network.subcarriers", net.subcarriers)?;
        let antennas = match required("network.antennas", net.antennas)? {
            Antennas::Same(m) => vec![m; cells],
            Antennas::PerCell(v) => v,
        };
        let mut c = NetworkConfig::with_shape(cells, devices, subcarriers, 1);
        c.antennas = antennas;
        if let Some(v) = net.bandwidth {
            c.bandwidth = v;
        }
        if let Some(v) = net.block_duration {
            c.block_duration = v;
        }
        if let Some(v) = power("network.noise_variance", net.noise_variance, net.noise_variance_dbm)? {
            c.noise_variance = v;
        }
        if let Some(v) = net.rng_seed {
            c.rng_seed = v;
        }
        if let Some(v) = net.access {
            c.access = v;
        }

        let d = self.devices;
        if let Some(r) = d.cell_radius {
            c.cell_radius = r;
        }
        let given = [d.distance.is_some(), d.distances.is_some(), d.placement.is_some()];
        if given.iter().filter(|g| **g).count() > 1 {
            return Err(Error::Config(
                "give at most one of devices.distance, devices.distances, devices.placement".into(),
            ));
        }
        if let Some(x) = d.distance {
            c.set_uniform_distance(x);
        } else if let Some(rows) = d.distances {
            c.placement = Placement::Fixed(rows);
        } else if let Some(p) = d.placement {
            match p.as_str() {
                "uniform" => {
                    c.placement = Placement::Uniform {
                        min_distance: d.min_distance.unwrap_or(10.0),
                    }
                }
                other => {
                    return Err(Error::Config(format!("unknown devices.placement `{other}`")))
                }
            }
        }

        let pl = self.path_loss;
        match pl.model.as_deref().unwrap_or("distance") {
            "constant" => {
                c.path_loss = PathLoss::Constant(required("path_loss.coefficient", pl.coefficient)?)
            }
            "distance" => {
                let def = PathLoss::default();
                let PathLoss::Distance {
                    reference_distance,
                    reference_coefficient,
                    exponent,
                } = def
                else {
                    unreachable!()
                };
                c.path_loss = PathLoss::Distance {
                    reference_distance: pl.reference_distance.unwrap_or(reference_distance),
                    reference_coefficient: pl.reference_coefficient.unwrap_or(reference_coefficient),
                    exponent: pl.exponent.unwrap_or(exponent),
                };
            }
            other => return Err(Error::Config(format!("unknown path_loss.model `{other}`"))),
        }

        if let Some(v) = self.wpt.efficiency {
            c.conversion_efficiency = v;
        }
        if let Some(v) = self.csi.mode {
            c.csi = v;
        }
        if let Some(v) = self.csi.error_variance {
            c.estimation_error_variance = v;
        }

        let l = self.limits;
        if let Some(v) = power("limits.bs_max_power", l.bs_max_power, l.bs_max_power_dbm)? {
            c.bs_max_power = v;
        }
        if let Some(v) = power("limits.user_max_power", l.user_max_power, l.user_max_power_dbm)? {
            c.user_max_power = v;
        }
        if let Some(v) = l.min_rate {
            c.min_rate = v;
        }

        if let Some(p) = self.power_model {
            let pm = &mut c.power_model;
            let pairs: [(&str, &mut f64, Option<f64>, Option<f64>); 8] = [
                ("power_model.dac", &mut pm.dac, p.dac, p.dac_dbm),
                ("power_model.mix", &mut pm.mix, p.mix, p.mix_dbm),
                ("power_model.filt", &mut pm.filt, p.filt, p.filt_dbm),
                ("power_model.filr", &mut pm.filr, p.filr, p.filr_dbm),
                ("power_model.lna", &mut pm.lna, p.lna, p.lna_dbm),
                ("power_model.ifa", &mut pm.ifa, p.ifa, p.ifa_dbm),
                ("power_model.adc", &mut pm.adc, p.adc, p.adc_dbm),
                ("power_model.syn", &mut pm.syn, p.syn, p.syn_dbm),
            ];
            for (name, slot, w, dbm) in pairs {
                if let Some(v) = power(name, w, dbm)? {
                    *slot = v;
                }
            }
        }

        let s = self.solver;
        let mut solver = SolverSettings::default();
        if let Some(v) = s.kind {
            solver.kind = v;
        }
        if let Some(v) = s.rho {
            solver.rho = v;
        }
        if let Some(v) = s.epsilon {
            solver.epsilon = v;
        }
        if let Some(v) = s.max_outer {
            solver.max_outer = v;
        }
        if let Some(v) = s.max_iterations {
            solver.max_iterations = v;
        }
        if let Some(v) = s.inner_tolerance {
            solver.inner_tolerance = v;
        }
        if let Some(v) = s.inner_max_iterations {
            solver.inner_max_iterations = v;
        }
        if let Some(v) = s.antenna_selection {
            solver.antenna_selection = v;
        }
        solver.fixed_power = power("solver.fixed_power", s.fixed_power, s.fixed_power_dbm)?;
        solver.fixed_wpt_time = s.fixed_wpt_time;
        if let Some(v) = s.oracle_power_points {
            solver.oracle.power_points = v;
        }
        if let Some(v) = s.oracle_time_points {
            solver.oracle.time_points = v;
        }
        if let Some(v) = s.oracle_refinements {
            solver.oracle.refinements = v;
        }

        c.validate()?;
        solver.validate(&c)?;
        Ok(Config {
            network: c,
            solver,
        })
    }
}

impl SolverSettings {
    pub fn validate(&self, net: &NetworkConfig) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::Config("solver.rho must be > 0".into()));
        }
        if !(self.epsilon > 0.0) || !(self.inner_tolerance > 0.0) {
            return Err(Error::Config("solver tolerances must be > 0".into()));
        }
        if let Some(p) = self.fixed_power {
            if !(0.0..=net.bs_max_power).contains(&p) {
                return Err(Error::Config("solver.fixed_power must lie in [0, bs_max_power]".into()));
            }
        }
        if let Some(t) = self.fixed_wpt_time {
            if !(t >= 0.0 && t < net.block_duration) {
                return Err(Error::Config("solver.fixed_wpt_time must lie in [0, T)".into()));
            }
        }
        if self.oracle.power_points == 0 || self.oracle.time_points == 0 {
            return Err(Error::Config("oracle grid needs at least one point per axis".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const MINIMAL: &str = "[network]\ncells = 1\ndevices = 2\nsubcarriers = 1\nantennas = 8\n";

    #[test]
    fn dbm_conversion() {
        assert_relative_eq!(dbm_to_watts(46.0), 39.8107, max_relative = 1e-5);
        assert_relative_eq!(dbm_to_watts(23.0), 0.19953, max_relative = 1e-4);
        assert_relative_eq!(dbm_to_watts(30.0), 1.0);
    }

    #[test]
    fn power_model_sums() {
        let pm = PowerModel::default();
        assert_relative_eq!(pm.bs(), 0.0428, max_relative = 1e-12);
        assert_relative_eq!(pm.user(), 0.1158, max_relative = 1e-12);
    }

    #[test]
    fn minimal_file_gets_table_defaults() {
        let c = Config::parse(MINIMAL, "mem").unwrap();
        assert_eq!(c.network.antennas, vec![8]);
        assert_relative_eq!(c.network.bs_max_power, 39.8107, max_relative = 1e-5);
        assert_relative_eq!(c.network.conversion_efficiency, 0.8);
        assert_relative_eq!(c.network.path_loss.coefficient(75.0), 1.0 / 75.0);
        assert_eq!(c.solver.rho, 0.088);
    }

    #[test]
    fn missing_field_is_named() {
        let e = Config::parse("[network]\ncells = 1\ndevices = 2\nantennas = 8\n", "mem");
        match e {
            Err(Error::MissingField(f)) => assert_eq!(f, "network.subcarriers"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_subcarriers_rejected() {
        let text = MINIMAL.replace("subcarriers = 1", "subcarriers = 0");
        assert!(matches!(Config::parse(&text, "mem"), Err(Error::Config(_))));
    }

    #[test]
    fn parse_error_carries_location() {
        let e = Config::parse("[network\ncells = 1", "bad.toml").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("bad.toml") && msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn dbm_and_watts_exclusive() {
        let text = format!("{MINIMAL}[limits]\nbs_max_power = 1.0\nbs_max_power_dbm = 30\n");
        assert!(Config::parse(&text, "mem").is_err());
    }
}
