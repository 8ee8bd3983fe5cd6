//! SINR, rate law, throughput, energy and constraint checks.

use crate::config::AccessMode;
use crate::error::{Error, Result};
use crate::grid::{Dims, Grid3};
use crate::scenario::Scenario;
use serde::Serialize;
use std::f64::consts::LN_2;
use std::io::Write;

/// Relative slack used by every constraint check.
const CHECK_TOL: f64 = 1e-9;

/// Decision variables. `antennas` and `indicator` may hold relaxed values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    pub power: Vec<f64>,
    pub wpt_time: Vec<f64>,
    pub antennas: Grid3<f64>,
    pub indicator: Grid3<f64>,
}

impl Allocation {
    /// Everyone active on every subcarrier with the full array.
    pub fn uniform(scn: &Scenario, power: f64, wpt_time: f64) -> Self {
        let d = scn.dims;
        Self {
            power: vec![power; d.cells],
            wpt_time: vec![wpt_time; d.cells],
            antennas: Grid3::from_fn(d, |k, _, _| scn.antennas[k] as f64),
            indicator: Grid3::filled(d, 1.0),
        }
    }

    pub fn dims(&self) -> Dims {
        self.indicator.dims()
    }

    /// Largest N over devices active anywhere in cell `k`, 0 if none.
    pub fn max_active_antennas(&self, k: usize) -> f64 {
        self.indicator
            .cell(k)
            .iter()
            .zip(self.antennas.cell(k))
            .filter(|(c, _)| **c > 0.0)
            .fold(0.0, |m, (_, n)| m.max(*n))
    }

    /// Occupancy of subcarrier `s` in cell `k`: the largest indicator on it.
    pub fn occupancy(&self, k: usize, s: usize) -> f64 {
        (0..self.dims().devices)
            .map(|u| self.indicator[(k, u, s)])
            .fold(0.0, f64::max)
    }
}

/// Descending by gain, ties by ascending index.
pub fn decoding_order(gains: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..gains.len()).collect();
    idx.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
    idx
}

/// Harvested energy per device, `harvest · τ · P`.
pub fn harvested_energies(scn: &Scenario, alloc: &Allocation) -> Grid3<f64> {
    Grid3::from_fn(scn.dims, |k, u, s| {
        scn.harvest[(k, u, s)] * alloc.wpt_time[k] * alloc.power[k]
    })
}

/// Uplink power `E / (T − τ)`; fails when an active device has no WIT time.
pub fn transmit_powers(scn: &Scenario, alloc: &Allocation) -> Result<Grid3<f64>> {
    let e = harvested_energies(scn, alloc);
    let mut p = Grid3::filled(scn.dims, 0.0);
    for ((k, u, s), ev) in e.iter() {
        let wit = scn.block - alloc.wpt_time[k];
        if wit > 0.0 {
            p[(k, u, s)] = ev / wit;
        } else if alloc.indicator[(k, u, s)] > 0.0 {
            return Err(Error::Degenerate(format!(
                "cell {k} has an active device but no information-transfer time"
            )));
        }
    }
    Ok(p)
}

/// Interference terms of one device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrTerms {
    pub signal: f64,
    pub intra: f64,
    pub inter: f64,
    pub estimation: f64,
    pub noise: f64,
}

impl SinrTerms {
    pub fn sinr(&self) -> f64 {
        self.signal / (self.intra + self.inter + self.estimation + self.noise)
    }
}

pub fn sinr_terms(
    scn: &Scenario,
    alloc: &Allocation,
    tx: &Grid3<f64>,
    k: usize,
    u: usize,
    s: usize,
) -> SinrTerms {
    let d = scn.dims;
    let rx = |j: usize, v: usize| alloc.indicator[(j, v, s)] * tx[(j, v, s)] * scn.gain[(j, v, s)];
    let intra = match scn.access {
        AccessMode::Oma => 0.0,
        AccessMode::Noma => {
            let rank = scn.rank(k, s, u);
            scn.order[k][s][rank + 1..].iter().map(|&v| rx(k, v)).sum()
        }
    };
    let inter = (0..d.cells)
        .filter(|&j| j != k)
        .map(|j| (0..d.devices).map(|v| rx(j, v)).sum::<f64>())
        .sum();
    SinrTerms {
        signal: tx[(k, u, s)] * scn.gain[(k, u, s)],
        intra,
        inter,
        estimation: tx[(k, u, s)] * scn.est_noise[(k, u, s)],
        noise: scn.noise,
    }
}

/// SINR of every device.
pub fn sinrs(scn: &Scenario, alloc: &Allocation) -> Result<Grid3<f64>> {
    let tx = transmit_powers(scn, alloc)?;
    Ok(Grid3::from_fn(scn.dims, |k, u, s| {
        sinr_terms(scn, alloc, &tx, k, u, s).sinr()
    }))
}

/// Rate law with `N` of `M` antennas selected: `B log₂(1 + (1 + ln(M/N)) γ N)`.
pub fn rate(m: usize, n: f64, sinr: f64, bandwidth: f64) -> Result<f64> {
    let mf = m as f64;
    if !(n >= 1.0 && n <= mf) {
        return Err(Error::Domain(format!("antenna count {n} outside [1, {m}]")));
    }
    Ok(rate_unchecked(mf, n, sinr, bandwidth))
}

#[inline]
pub fn rate_unchecked(m: f64, n: f64, sinr: f64, bandwidth: f64) -> f64 {
    bandwidth * (1.0 + (1.0 + (m / n).ln()) * sinr * n).ln() / LN_2
}

pub fn rates(scn: &Scenario, alloc: &Allocation, sinr: &Grid3<f64>) -> Result<Grid3<f64>> {
    let mut r = Grid3::filled(scn.dims, 0.0);
    for ((k, u, s), g) in sinr.iter() {
        r[(k, u, s)] = rate(
            scn.antennas[k],
            alloc.antennas[(k, u, s)],
            *g,
            scn.subcarrier_bandwidth,
        )?;
    }
    Ok(r)
}

/// Σ c (T − τ_k) R.
pub fn total_throughput(scn: &Scenario, alloc: &Allocation, rates: &Grid3<f64>) -> f64 {
    rates
        .iter()
        .map(|((k, u, s), r)| alloc.indicator[(k, u, s)] * (scn.block - alloc.wpt_time[k]) * r)
        .sum()
}

/// Σ_k [(P_bs max N + U P_user) T + P_k τ_k Σ_s occupancy].
pub fn total_energy(scn: &Scenario, alloc: &Allocation) -> f64 {
    let d = scn.dims;
    let pm = &scn.power_model;
    (0..d.cells)
        .map(|k| {
            let circuit = (pm.bs() * alloc.max_active_antennas(k) + d.devices as f64 * pm.user())
                * scn.block;
            let occ: f64 = (0..d.subcarriers).map(|s| alloc.occupancy(k, s)).sum();
            circuit + alloc.power[k] * alloc.wpt_time[k] * occ
        })
        .sum()
}

/// `R − η E`.
pub fn subtractive_objective(throughput: f64, energy: f64, eta: f64) -> f64 {
    throughput - eta * energy
}

/// Per-constraint satisfaction flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintFlags {
    /// Per cell: 0 ≤ P ≤ P_bs,max.
    pub c1: Vec<bool>,
    /// Per cell: 0 ≤ τ ≤ T.
    pub c2: Vec<bool>,
    /// Per device: active uplink power ≤ P_user,max.
    pub c3: Grid3<bool>,
    /// Per device: active rate ≥ R_min B_s.
    pub c4: Grid3<bool>,
    /// Per device: 1 ≤ N ≤ M_k.
    pub c5: Grid3<bool>,
    /// Per `[k][s]`: indicator bounds and the multiplexing limit.
    pub c6: Vec<Vec<bool>>,
}

impl ConstraintFlags {
    pub fn summary(&self) -> [bool; 6] {
        [
            self.c1.iter().all(|x| *x),
            self.c2.iter().all(|x| *x),
            self.c3.as_slice().iter().all(|x| *x),
            self.c4.as_slice().iter().all(|x| *x),
            self.c5.as_slice().iter().all(|x| *x),
            self.c6.iter().flatten().all(|x| *x),
        ]
    }

    pub fn all(&self) -> bool {
        self.summary().iter().all(|x| *x)
    }
}

fn le(a: f64, b: f64) -> bool {
    a <= b + CHECK_TOL * b.abs().max(1e-300)
}

pub fn check_constraints(scn: &Scenario, alloc: &Allocation, rates: &Grid3<f64>) -> ConstraintFlags {
    let d = scn.dims;
    let c1 = alloc
        .power
        .iter()
        .map(|p| *p >= 0.0 && le(*p, scn.bs_max_power))
        .collect();
    let c2 = alloc
        .wpt_time
        .iter()
        .map(|t| *t >= 0.0 && le(*t, scn.block))
        .collect();
    let tx = harvested_energies(scn, alloc);
    let c3 = Grid3::from_fn(d, |k, u, s| {
        if alloc.indicator[(k, u, s)] <= 0.0 {
            return true;
        }
        let wit = scn.block - alloc.wpt_time[k];
        wit > 0.0 && le(tx[(k, u, s)] / wit, scn.user_max_power)
    });
    let floor = scn.min_rate_bps();
    let c4 = Grid3::from_fn(d, |k, u, s| {
        alloc.indicator[(k, u, s)] <= 0.0 || rates[(k, u, s)] >= floor * (1.0 - CHECK_TOL)
    });
    let c5 = Grid3::from_fn(d, |k, u, s| {
        let n = alloc.antennas[(k, u, s)];
        n >= 1.0 && n <= scn.antennas[k] as f64
    });
    let cap = match scn.access {
        AccessMode::Noma => d.devices as f64,
        AccessMode::Oma => 1.0,
    };
    let c6 = (0..d.cells)
        .map(|k| {
            (0..d.subcarriers)
                .map(|s| {
                    let col: Vec<f64> = (0..d.devices).map(|u| alloc.indicator[(k, u, s)]).collect();
                    col.iter().all(|c| (0.0..=1.0).contains(c)) && le(col.iter().sum(), cap)
                })
                .collect()
        })
        .collect();
    ConstraintFlags {
        c1,
        c2,
        c3,
        c4,
        c5,
        c6,
    }
}

/// Everything computed for one allocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EEReport {
    pub allocation: Allocation,
    pub harvested: Grid3<f64>,
    pub tx_power: Grid3<f64>,
    pub sinr: Grid3<f64>,
    pub rates: Grid3<f64>,
    /// Bits delivered per device, `c (T − τ) R`.
    pub throughput: Grid3<f64>,
    pub total_throughput: f64,
    pub total_energy: f64,
    pub ee: f64,
    pub constraints: ConstraintFlags,
}

impl EEReport {
    pub fn feasible(&self) -> bool {
        self.constraints.all()
    }

    pub fn subtractive(&self, eta: f64) -> f64 {
        subtractive_objective(self.total_throughput, self.total_energy, eta)
    }
}

/// Full evaluation. In OMA mode the exclusive-assignment rule is checked first.
pub fn energy_efficiency(scn: &Scenario, alloc: &Allocation) -> Result<EEReport> {
    if scn.access == AccessMode::Oma {
        check_exclusive(alloc)?;
    }
    let tx_power = transmit_powers(scn, alloc)?;
    let sinr = sinrs(scn, alloc)?;
    let rates = rates(scn, alloc, &sinr)?;
    let per_device = Grid3::from_fn(scn.dims, |k, u, s| {
        alloc.indicator[(k, u, s)] * (scn.block - alloc.wpt_time[k]) * rates[(k, u, s)]
    });
    let throughput = total_throughput(scn, alloc, &rates);
    let energy = total_energy(scn, alloc);
    if !(energy > 0.0) {
        return Err(Error::Degenerate("total consumed energy is zero".into()));
    }
    let constraints = check_constraints(scn, alloc, &rates);
    Ok(EEReport {
        allocation: alloc.clone(),
        harvested: harvested_energies(scn, alloc),
        tx_power,
        sinr,
        rates,
        throughput: per_device,
        total_throughput: throughput,
        total_energy: energy,
        ee: throughput / energy,
        constraints,
    })
}

/// Evaluates `alloc` with intra-cell interference removed and at most one
/// device per subcarrier per cell.
pub fn oma_mode_metrics(scn: &Scenario, alloc: &Allocation) -> Result<EEReport> {
    let mut oma = scn.clone();
    oma.access = AccessMode::Oma;
    energy_efficiency(&oma, alloc)
}

fn check_exclusive(alloc: &Allocation) -> Result<()> {
    let d = alloc.dims();
    for k in 0..d.cells {
        for s in 0..d.subcarriers {
            let sum: f64 = (0..d.devices).map(|u| alloc.indicator[(k, u, s)]).sum();
            if sum > 1.0 + CHECK_TOL {
                return Err(Error::Mode(format!(
                    "subcarrier {s} of cell {k} carries total indicator {sum} in OMA mode"
                )));
            }
        }
    }
    Ok(())
}

/// Report CSV columns, in order.
pub const REPORT_COLUMNS: [&str; 21] = [
    "kind",
    "cell",
    "device",
    "subcarrier",
    "power_w",
    "wpt_time_s",
    "antennas",
    "indicator",
    "harvested_j",
    "tx_power_w",
    "sinr",
    "rate_bps",
    "throughput_bits",
    "energy_j",
    "ee_bits_per_j",
    "c1",
    "c2",
    "c3",
    "c4",
    "c5",
    "c6",
];

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// One row per `(k, u, s)`, then a `summary` row.
pub fn write_report_csv<W: Write>(report: &EEReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_COLUMNS)?;
    let a = &report.allocation;
    let c = &report.constraints;
    let f = |x: f64| format!("{x:.12e}");
    for ((k, u, s), r) in report.rates.iter() {
        w.write_record([
            "device".to_string(),
            k.to_string(),
            u.to_string(),
            s.to_string(),
            f(a.power[k]),
            f(a.wpt_time[k]),
            f(a.antennas[(k, u, s)]),
            f(a.indicator[(k, u, s)]),
            f(report.harvested[(k, u, s)]),
            f(report.tx_power[(k, u, s)]),
            f(report.sinr[(k, u, s)]),
            f(*r),
            f(report.throughput[(k, u, s)]),
            String::new(),
            String::new(),
            flag(c.c1[k]).into(),
            flag(c.c2[k]).into(),
            flag(c.c3[(k, u, s)]).into(),
            flag(c.c4[(k, u, s)]).into(),
            flag(c.c5[(k, u, s)]).into(),
            flag(c.c6[k][s]).into(),
        ])?;
    }
    let sm = c.summary();
    let mut row = vec!["summary".to_string()];
    row.extend(std::iter::repeat_n(String::new(), 11));
    row.push(f(report.total_throughput));
    row.push(f(report.total_energy));
    row.push(f(report.ee));
    row.extend(sm.iter().map(|b| flag(*b).to_string()));
    w.write_record(&row)?;
    w.flush()?;
    Ok(())
}
