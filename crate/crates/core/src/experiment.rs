//! Whole-pipeline runs and parameter sweeps.

use crate::admm::{self, AdmmSettings, PgaSettings, TraceRow};
use crate::config::{AccessMode, Config, CsiMode, NetworkConfig, Placement, SolverKind, SolverSettings};
use crate::dinkelbach::{self, AdmmInner, DinkelbachOutcome};
use crate::error::{Error, Result};
use crate::metrics::{self, EEReport};
use crate::oracle::{GridSpec, OracleInner};
use crate::scenario::{Controls, Scenario};
use rayon::prelude::*;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub fn admm_settings(s: &SolverSettings) -> AdmmSettings {
    AdmmSettings {
        rho: s.rho,
        epsilon: s.epsilon,
        max_iterations: s.max_iterations,
        local: PgaSettings {
            tolerance: s.inner_tolerance,
            max_iterations: s.inner_max_iterations,
        },
        ..AdmmSettings::default()
    }
}

pub fn grid_spec(s: &SolverSettings) -> GridSpec {
    GridSpec::new(s.oracle.power_points, s.oracle.time_points, s.oracle.refinements)
}

/// Outcome of one pipeline run.
#[derive(Debug, Clone)]
pub struct Run {
    pub report: EEReport,
    pub dinkelbach: DinkelbachOutcome,
    /// ADMM rows per Dinkelbach iteration; empty for the oracle.
    pub admm_traces: Vec<(usize, Vec<TraceRow>)>,
    pub admm_iterations: Vec<usize>,
}

/// Channels, link budget, Dinkelbach around the selected inner solver,
/// rounding, final report.
pub fn solve(network: &NetworkConfig, solver: &SolverSettings) -> Result<Run> {
    solver.validate(network)?;
    let scn = Scenario::build(network)?.with_controls(Controls::from(solver));
    solve_scenario(&scn, solver)
}

pub fn solve_scenario(scn: &Scenario, solver: &SolverSettings) -> Result<Run> {
    match solver.kind {
        SolverKind::Admm => {
            let mut inner = AdmmInner::new(admm_settings(solver));
            let out = dinkelbach::dinkelbach_solve(scn, &mut inner, solver.epsilon, solver.max_outer)?;
            Ok(Run {
                report: out.report.clone(),
                dinkelbach: out,
                admm_traces: inner.traces,
                admm_iterations: inner.iterations,
            })
        }
        SolverKind::Oracle => {
            let grid = grid_spec(solver);
            grid.check(scn)?;
            let mut inner = OracleInner::new(grid);
            let out = dinkelbach::dinkelbach_solve(scn, &mut inner, solver.epsilon, solver.max_outer)?;
            Ok(Run {
                report: out.report.clone(),
                dinkelbach: out,
                admm_traces: Vec::new(),
                admm_iterations: Vec::new(),
            })
        }
    }
}

/// Command-line overrides shared by `run` and `sweep`.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub rho: Option<f64>,
    pub epsilon: Option<f64>,
    pub csi: Option<CsiMode>,
    pub sigma_e2: Option<f64>,
    pub mode: Option<AccessMode>,
    pub solver: Option<SolverKind>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut Config) {
        let n = &mut cfg.network;
        if let Some(v) = self.seed {
            n.rng_seed = v;
        }
        if let Some(v) = self.csi {
            n.csi = v;
        }
        if let Some(v) = self.sigma_e2 {
            n.estimation_error_variance = v;
        }
        if let Some(v) = self.mode {
            n.access = v;
        }
        let s = &mut cfg.solver;
        if let Some(v) = self.rho {
            s.rho = v;
        }
        if let Some(v) = self.epsilon {
            s.epsilon = v;
        }
        if let Some(v) = self.solver {
            s.kind = v;
        }
    }
}

/// Runs a config file with overrides.
pub fn run_scenario(path: impl AsRef<Path>, overrides: &Overrides) -> Result<Run> {
    let mut cfg = Config::load(path)?;
    overrides.apply(&mut cfg);
    cfg.network.validate()?;
    solve(&cfg.network, &cfg.solver)
}

/// Writes `report.csv`, `dinkelbach_trace.csv` and `admm_trace.csv` into `dir`.
pub fn write_run(run: &Run, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let paths = [
        dir.join("report.csv"),
        dir.join("dinkelbach_trace.csv"),
        dir.join("admm_trace.csv"),
    ];
    metrics::write_report_csv(&run.report, BufWriter::new(File::create(&paths[0])?))?;
    dinkelbach::write_trace_csv(&run.dinkelbach.state, BufWriter::new(File::create(&paths[1])?))?;
    write_admm_traces(run, BufWriter::new(File::create(&paths[2])?))?;
    Ok(paths.to_vec())
}

/// All ADMM solves of a run, the Dinkelbach step prefixed to each row.
pub fn write_admm_traces<W: Write>(run: &Run, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "outer_iteration",
        "iteration",
        "cell",
        "local_P",
        "global_P",
        "lambda",
        "residual_sq",
        "local_objective",
    ])?;
    let f = |x: f64| format!("{x:.12e}");
    for (outer, rows) in &run.admm_traces {
        for r in rows {
            w.write_record([
                outer.to_string(),
                r.iteration.to_string(),
                r.cell.to_string(),
                f(r.local_power),
                f(r.global_power),
                f(r.lambda),
                f(r.residual_sq),
                f(r.local_objective),
            ])?;
        }
    }
    let total: usize = run.admm_iterations.iter().sum();
    w.write_record([
        "summary".to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        format!("iterations={total}"),
        format!("ee={}", f(run.report.ee)),
    ])?;
    w.flush()?;
    Ok(())
}

/// Short SHA-256 of the effective configuration.
pub fn config_hash(network: &NetworkConfig, solver: &SolverSettings) -> String {
    let digest = Sha256::digest(format!("{network:?}|{solver:?}").as_bytes());
    hex::encode(&digest[..8])
}

// ---- sweeps ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Distance,
    Antennas,
    Devices,
    Subcarriers,
    BsMaxPower,
    BsMaxPowerDbm,
    FixedPower,
    FixedPowerDbm,
    FixedWptTime,
    ErrorVariance,
    Rho,
    MinRate,
    ConversionEfficiency,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Distance => "distance",
            Self::Antennas => "antennas",
            Self::Devices => "devices",
            Self::Subcarriers => "subcarriers",
            Self::BsMaxPower => "bs_max_power",
            Self::BsMaxPowerDbm => "bs_max_power_dbm",
            Self::FixedPower => "fixed_power",
            Self::FixedPowerDbm => "fixed_power_dbm",
            Self::FixedWptTime => "fixed_wpt_time",
            Self::ErrorVariance => "error_variance",
            Self::Rho => "rho",
            Self::MinRate => "min_rate",
            Self::ConversionEfficiency => "conversion_efficiency",
        }
    }

    fn apply(&self, cfg: &mut Config, v: f64) -> Result<()> {
        let n = &mut cfg.network;
        let count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!("{} needs a positive integer, got {v}", self.name())))
            }
        };
        match self {
            Self::Distance => n.set_uniform_distance(v),
            Self::Antennas => n.antennas = vec![count(v)?; n.cells],
            Self::Devices => {
                n.devices = count(v)?;
                reshape_placement(n);
            }
            Self::Subcarriers => n.subcarriers = count(v)?,
            Self::BsMaxPower => n.bs_max_power = v,
            Self::BsMaxPowerDbm => n.bs_max_power = crate::config::dbm_to_watts(v),
            Self::FixedPower => cfg.solver.fixed_power = Some(v),
            Self::FixedPowerDbm => cfg.solver.fixed_power = Some(crate::config::dbm_to_watts(v)),
            Self::FixedWptTime => cfg.solver.fixed_wpt_time = Some(v),
            Self::ErrorVariance => n.estimation_error_variance = v,
            Self::Rho => cfg.solver.rho = v,
            Self::MinRate => n.min_rate = v,
            Self::ConversionEfficiency => n.conversion_efficiency = v,
        }
        Ok(())
    }
}

fn reshape_placement(n: &mut NetworkConfig) {
    if let Placement::Fixed(rows) = &n.placement {
        let d = rows.first().and_then(|r| r.first()).copied().unwrap_or(75.0);
        n.set_uniform_distance(d);
    }
}

/// CSI variant of a sweep row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsiVariant {
    pub mode: CsiMode,
    pub error_variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: Config,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub repetitions: usize,
    pub first_seed: u64,
    pub solver: SolverKind,
    pub csi: Vec<CsiVariant>,
    pub access: Vec<AccessMode>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    base: String,
    parameter: SweepParameter,
    values: Vec<f64>,
    repetitions: Option<usize>,
    seed: Option<u64>,
    solver: Option<SolverKind>,
    csi: Option<Vec<CsiMode>>,
    error_variances: Option<Vec<f64>>,
    access: Option<Vec<AccessMode>>,
}

impl SweepSpec {
    /// Loads a sweep file; `base` is resolved relative to it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let raw: RawSweep = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let base_path = path.parent().unwrap_or(Path::new(".")).join(&raw.base);
        let base = Config::load(base_path)?;
        Self::from_parts(base, raw)
    }

    fn from_parts(base: Config, raw: RawSweep) -> Result<Self> {
        let modes = raw.csi.unwrap_or_else(|| vec![base.network.csi]);
        let sigmas = raw
            .error_variances
            .unwrap_or_else(|| vec![base.network.estimation_error_variance]);
        let mut csi = Vec::new();
        for m in modes {
            match m {
                CsiMode::Perfect => csi.push(CsiVariant {
                    mode: m,
                    error_variance: 0.0,
                }),
                CsiMode::Imperfect => csi.extend(sigmas.iter().map(|s| CsiVariant {
                    mode: m,
                    error_variance: *s,
                })),
            }
        }
        let spec = Self {
            parameter: raw.parameter,
            values: raw.values,
            repetitions: raw.repetitions.unwrap_or(100),
            first_seed: raw.seed.unwrap_or(base.network.rng_seed),
            solver: raw.solver.unwrap_or(base.solver.kind),
            csi,
            access: raw.access.unwrap_or_else(|| vec![base.network.access]),
            base,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep value list is empty".into()));
        }
        if self.repetitions == 0 || self.csi.is_empty() || self.access.is_empty() {
            return Err(Error::Config("sweep needs repetitions, CSI modes and access modes".into()));
        }
        for v in &self.values {
            let mut c = self.base.clone();
            self.parameter.apply(&mut c, *v)?;
        }
        Ok(())
    }

    /// Applies CLI overrides: seed, repetitions, solver, CSI, access, ρ, ε.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.first_seed = v;
        }
        if let Some(v) = o.reps {
            self.repetitions = v;
        }
        if let Some(v) = o.solver {
            self.solver = v;
        }
        if let Some(m) = o.csi {
            let s = o.sigma_e2.unwrap_or(self.base.network.estimation_error_variance);
            self.csi = vec![CsiVariant {
                mode: m,
                error_variance: if m == CsiMode::Perfect { 0.0 } else { s },
            }];
        } else if let Some(s) = o.sigma_e2 {
            for c in self.csi.iter_mut().filter(|c| c.mode == CsiMode::Imperfect) {
                c.error_variance = s;
            }
        }
        if let Some(m) = o.mode {
            self.access = vec![m];
        }
        if let Some(v) = o.rho {
            self.base.solver.rho = v;
        }
        if let Some(v) = o.epsilon {
            self.base.solver.epsilon = v;
        }
    }

    /// Every point in emission order.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for &value in &self.values {
            let mut variants = self.csi.clone();
            if self.parameter == SweepParameter::ErrorVariance {
                variants.dedup_by_key(|c| c.mode);
                for c in variants.iter_mut().filter(|c| c.mode == CsiMode::Imperfect) {
                    c.error_variance = value;
                }
            }
            for &csi in &variants {
                for &access in &self.access {
                    for r in 0..self.repetitions {
                        out.push(SweepPoint {
                            value,
                            csi,
                            access,
                            seed: self.first_seed + r as u64,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn point_config(&self, p: &SweepPoint) -> Result<Config> {
        let mut c = self.base.clone();
        c.network.csi = p.csi.mode;
        c.network.estimation_error_variance = p.csi.error_variance;
        if self.parameter != SweepParameter::ErrorVariance {
            self.parameter.apply(&mut c, p.value)?;
        }
        c.network.rng_seed = p.seed;
        c.network.access = p.access;
        c.solver.kind = self.solver;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub csi: CsiVariant,
    pub access: AccessMode,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: SweepPoint,
    pub config_hash: String,
    /// `Ok((ee, throughput, energy, outer iterations, ADMM iterations))`.
    pub result: std::result::Result<(f64, f64, f64, usize, usize), String>,
}

pub fn run_point(spec: &SweepSpec, p: &SweepPoint) -> SweepRow {
    let cfg = spec.point_config(p);
    let hash = cfg
        .as_ref()
        .map(|c| config_hash(&c.network, &c.solver))
        .unwrap_or_default();
    let result = cfg
        .and_then(|c| solve(&c.network, &c.solver))
        .map(|run| {
            (
                run.report.ee,
                run.report.total_throughput,
                run.report.total_energy,
                run.dinkelbach.state.iteration,
                run.admm_iterations.iter().sum(),
            )
        })
        .map_err(|e| e.to_string());
    SweepRow {
        point: *p,
        config_hash: hash,
        result,
    }
}

/// Runs every point on up to `workers` threads; rows come back in point order.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<Vec<SweepRow>> {
    let points = spec.points();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(|| points.par_iter().map(|p| run_point(spec, p)).collect()))
}

fn csi_name(c: &CsiVariant) -> &'static str {
    match c.mode {
        CsiMode::Perfect => "perfect",
        CsiMode::Imperfect => "imperfect",
    }
}

fn access_name(a: AccessMode) -> &'static str {
    match a {
        AccessMode::Noma => "noma",
        AccessMode::Oma => "oma",
    }
}

fn solver_name(s: SolverKind) -> &'static str {
    match s {
        SolverKind::Admm => "admm",
        SolverKind::Oracle => "oracle",
    }
}

/// Long format, one row per point.
pub fn write_sweep_csv<W: Write>(spec: &SweepSpec, rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "parameter",
        "value",
        "seed",
        "csi",
        "sigma_e2",
        "access",
        "solver",
        "status",
        "ee",
        "throughput",
        "energy",
        "outer_iterations",
        "admm_iterations",
        "config_hash",
    ])?;
    let f = |x: f64| format!("{x:.12e}");
    for r in rows {
        let p = &r.point;
        let mut rec = vec![
            spec.parameter.name().to_string(),
            p.value.to_string(),
            p.seed.to_string(),
            csi_name(&p.csi).to_string(),
            p.csi.error_variance.to_string(),
            access_name(p.access).to_string(),
            solver_name(spec.solver).to_string(),
        ];
        match &r.result {
            Ok((ee, thr, en, outer, inner)) => rec.extend([
                "ok".to_string(),
                f(*ee),
                f(*thr),
                f(*en),
                outer.to_string(),
                inner.to_string(),
            ]),
            Err(e) => {
                rec.push(format!("failed: {e}"));
                rec.extend(std::iter::repeat_n(String::new(), 5));
            }
        }
        rec.push(r.config_hash.clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Seed-averaged statistics of one `(value, csi, access)` group.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub value: f64,
    pub csi: CsiVariant,
    pub access: AccessMode,
    pub ok: usize,
    pub failed: usize,
    pub mean_ee: f64,
    pub std_ee: f64,
    pub mean_throughput: f64,
    pub mean_energy: f64,
    pub first_seed: u64,
    pub last_seed: u64,
    /// Hash of the first point's configuration.
    pub config_hash: String,
}

/// Groups consecutive rows of the same point; rows must be in point order.
pub fn aggregate(rows: &[SweepRow]) -> Vec<Aggregate> {
    let mut out: Vec<Aggregate> = Vec::new();
    let mut acc: Vec<(f64, f64, f64)> = Vec::new();
    let same = |a: &SweepPoint, b: &Aggregate| {
        a.value == b.value && a.csi == b.csi && a.access == b.access
    };
    let flush = |g: &mut Aggregate, acc: &mut Vec<(f64, f64, f64)>| {
        let n = acc.len() as f64;
        if n > 0.0 {
            g.mean_ee = acc.iter().map(|x| x.0).sum::<f64>() / n;
            g.mean_throughput = acc.iter().map(|x| x.1).sum::<f64>() / n;
            g.mean_energy = acc.iter().map(|x| x.2).sum::<f64>() / n;
            g.std_ee = if n > 1.0 {
                (acc.iter().map(|x| (x.0 - g.mean_ee).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
        } else {
            g.mean_ee = f64::NAN;
            g.mean_throughput = f64::NAN;
            g.mean_energy = f64::NAN;
            g.std_ee = f64::NAN;
        }
        acc.clear();
    };
    for r in rows {
        let p = &r.point;
        if out.last().is_none_or(|g| !same(p, g)) {
            if let Some(g) = out.last_mut() {
                flush(g, &mut acc);
            }
            out.push(Aggregate {
                value: p.value,
                csi: p.csi,
                access: p.access,
                ok: 0,
                failed: 0,
                mean_ee: 0.0,
                std_ee: 0.0,
                mean_throughput: 0.0,
                mean_energy: 0.0,
                first_seed: p.seed,
                last_seed: p.seed,
                config_hash: r.config_hash.clone(),
            });
        }
        let g = out.last_mut().unwrap();
        g.last_seed = p.seed;
        match &r.result {
            Ok((ee, thr, en, _, _)) => {
                g.ok += 1;
                acc.push((*ee, *thr, *en));
            }
            Err(_) => g.failed += 1,
        }
    }
    if let Some(g) = out.last_mut() {
        flush(g, &mut acc);
    }
    out
}

pub fn write_aggregate_csv<W: Write>(spec: &SweepSpec, groups: &[Aggregate], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "parameter",
        "value",
        "csi",
        "sigma_e2",
        "access",
        "solver",
        "ok",
        "failed",
        "mean_ee",
        "std_ee",
        "mean_throughput",
        "mean_energy",
        "seeds",
        "config_hash",
    ])?;
    let f = |x: f64| format!("{x:.12e}");
    for g in groups {
        w.write_record([
            spec.parameter.name().to_string(),
            g.value.to_string(),
            csi_name(&g.csi).to_string(),
            g.csi.error_variance.to_string(),
            access_name(g.access).to_string(),
            solver_name(spec.solver).to_string(),
            g.ok.to_string(),
            g.failed.to_string(),
            f(g.mean_ee),
            f(g.std_ee),
            f(g.mean_throughput),
            f(g.mean_energy),
            format!("{}-{}", g.first_seed, g.last_seed),
            g.config_hash.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Final ADMM EE per call, exposed for the examples.
pub fn finalize_admm(scn: &Scenario, out: &admm::AdmmOutcome) -> Result<EEReport> {
    let a = admm::finalize(scn, &out.allocation)?;
    metrics::energy_efficiency(scn, &a)
}
