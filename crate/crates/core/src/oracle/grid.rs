//! Exhaustive search on tiny instances.
//!
//! Every binary indicator pattern is enumerated together with a per-cell
//! `(P, τ)` grid and every antenna count `1..=M_k` (one count per cell: the
//! rate grows with `N` and the energy only sees the largest, so per-device
//! counts never beat a common one). The first pass crowds τ towards zero,
//! where good WPT times live; each of the `refinements` later passes re-lays
//! a uniform `(P, τ)` grid between the incumbent's neighbours.

use crate::config::AccessMode;
use crate::dinkelbach::{subtractive_objective, InnerSolver};
use crate::error::{Error, Result};
use crate::grid::Grid3;
use crate::metrics::Allocation;
use crate::scenario::Scenario;
use std::f64::consts::LN_2;

/// Largest number of `(P, τ, N, C)` tuples one search may visit.
pub const GRID_BOUND: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub power_points: usize,
    pub time_points: usize,
    pub refinements: usize,
    pub bound: f64,
}

impl GridSpec {
    pub fn new(power_points: usize, time_points: usize, refinements: usize) -> Self {
        Self {
            power_points,
            time_points,
            refinements,
            bound: GRID_BOUND,
        }
    }

    /// Total tuples over all passes for `scn`.
    pub fn size(&self, scn: &Scenario) -> f64 {
        let d = scn.dims;
        let k = d.cells as f64;
        let np = if scn.controls.fixed_power.is_some() { 1 } else { self.power_points } as f64;
        let nt = if scn.controls.fixed_wpt_time.is_some() { 1 } else { self.time_points } as f64;
        let n: f64 = (0..d.cells).map(|k| antenna_choices(scn, k).len() as f64).product();
        let cols = match scn.access {
            AccessMode::Noma => 2f64.powi(d.devices as i32),
            AccessMode::Oma => d.devices as f64 + 1.0,
        };
        let c = cols.powf((d.cells * d.subcarriers) as f64);
        (np * nt).powf(k) * n * c * (self.refinements as f64 + 1.0)
    }

    pub fn check(&self, scn: &Scenario) -> Result<()> {
        if self.power_points == 0 || self.time_points == 0 {
            return Err(Error::Config("oracle grid needs at least one point per axis".into()));
        }
        let points = self.size(scn);
        if points > self.bound {
            return Err(Error::GridTooLarge {
                points,
                bound: self.bound,
            });
        }
        Ok(())
    }
}

fn antenna_choices(scn: &Scenario, k: usize) -> Vec<usize> {
    let m = scn.antennas[k];
    if scn.controls.antenna_selection {
        (1..=m).collect()
    } else {
        vec![m]
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    spaced(lo, hi, n, 1)
}

/// `lo + (hi − lo) (i / (n − 1))^power`; a single point sits at `hi` for a
/// degenerate range and at the midpoint otherwise.
fn spaced(lo: f64, hi: f64, n: usize, power: i32) -> Vec<f64> {
    if hi <= lo {
        return vec![hi];
    }
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * (i as f64 / (n - 1) as f64).powi(power))
        .collect()
}

/// Range spanned by the neighbours of `v` in `axis`.
fn around(axis: &[f64], v: f64, bounds: (f64, f64)) -> (f64, f64) {
    let i = axis
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
        .map_or(0, |(i, _)| i);
    let lo = if i > 0 { axis[i - 1] } else { axis[0] };
    let hi = if i + 1 < axis.len() { axis[i + 1] } else { axis[i] };
    (lo.min(v).max(bounds.0), hi.max(v).min(bounds.1))
}

/// What the search maximizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    /// R / E
    Ratio,
    /// R − ηE
    Subtractive(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub allocation: Allocation,
    pub value: f64,
    pub throughput: f64,
    pub energy: f64,
    pub ee: f64,
    pub evaluated: usize,
}

/// Best feasible allocation by EE.
pub fn brute_force_optimum(scn: &Scenario, grid: &GridSpec) -> Result<OracleResult> {
    search(scn, grid, Target::Ratio)
}

/// Indicator patterns of one `(k, s)` column.
fn column_patterns(devices: usize, access: AccessMode) -> Vec<u32> {
    match access {
        AccessMode::Noma => (0..(1u32 << devices)).collect(),
        AccessMode::Oma => std::iter::once(0)
            .chain((0..devices).map(|u| 1u32 << u))
            .collect(),
    }
}

struct Best {
    value: f64,
    powers: Vec<f64>,
    times: Vec<f64>,
    antennas: Vec<usize>,
    pattern: Vec<u32>,
    throughput: f64,
    energy: f64,
}

pub fn search(scn: &Scenario, grid: &GridSpec, target: Target) -> Result<OracleResult> {
    grid.check(scn)?;
    let d = scn.dims;
    let kk = d.cells;
    let t_block = scn.block;
    let bw = scn.subcarrier_bandwidth / LN_2;
    let floor = scn.min_rate_bps();
    let pm = &scn.power_model;
    let choices: Vec<Vec<usize>> = (0..kk).map(|k| antenna_choices(scn, k)).collect();
    let pats = column_patterns(d.devices, scn.access);
    let ncols = kk * d.subcarriers;

    let p_box = |_k: usize| match scn.controls.fixed_power {
        Some(p) => (p, p),
        None => (0.0, scn.bs_max_power),
    };
    let t_box = |_k: usize| match scn.controls.fixed_wpt_time {
        Some(t) => (t, t),
        None => (0.0, scn.max_wpt_time()),
    };
    let np = if scn.controls.fixed_power.is_some() { 1 } else { grid.power_points };
    let nt = if scn.controls.fixed_wpt_time.is_some() { 1 } else { grid.time_points };

    let mut ranges: Vec<((f64, f64), (f64, f64))> = (0..kk).map(|k| (p_box(k), t_box(k))).collect();
    let mut best: Option<Best> = None;
    let mut evaluated = 0usize;

    // Scratch buffers.
    let mut w = vec![0.0; kk];
    let mut rate_sum = vec![vec![0.0; 0]; kk];
    let mut feasible_n = vec![vec![true; 0]; kk];
    for k in 0..kk {
        rate_sum[k] = vec![0.0; choices[k].len()];
        feasible_n[k] = vec![true; choices[k].len()];
    }

    for level in 0..=grid.refinements {
        // The first pass packs WPT times towards zero, where optima sit.
        let tpow = if level == 0 { 3 } else { 1 };
        let pv: Vec<Vec<f64>> = ranges.iter().map(|(p, _)| linspace(p.0, p.1, np)).collect();
        let tv: Vec<Vec<f64>> = ranges.iter().map(|(_, t)| spaced(t.0, t.1, nt, tpow)).collect();
        let per_cell = np * nt;
        let joint = per_cell.pow(kk as u32);

        let mut pattern = vec![0usize; ncols];
        'patterns: loop {
            let cols: Vec<u32> = pattern.iter().map(|i| pats[*i]).collect();
            let on = |k: usize, u: usize, s: usize| (cols[k * d.subcarriers + s] >> u) & 1 == 1;
            let active: Vec<bool> = (0..kk)
                .map(|k| (0..d.subcarriers).any(|s| cols[k * d.subcarriers + s] != 0))
                .collect();
            let occ: Vec<f64> = (0..kk)
                .map(|k| (0..d.subcarriers).filter(|&s| cols[k * d.subcarriers + s] != 0).count() as f64)
                .collect();
            let amax: Vec<f64> = (0..kk)
                .map(|k| {
                    let mut a: f64 = 0.0;
                    for u in 0..d.devices {
                        for s in 0..d.subcarriers {
                            if on(k, u, s) {
                                a = a.max(scn.harvest[(k, u, s)]);
                            }
                        }
                    }
                    a
                })
                .collect();
            // Received power per unit w of each cell on each subcarrier.
            let load: Vec<Vec<f64>> = (0..kk)
                .map(|k| {
                    (0..d.subcarriers)
                        .map(|s| {
                            (0..d.devices)
                                .filter(|&u| on(k, u, s))
                                .map(|u| scn.harvest[(k, u, s)] * scn.gain[(k, u, s)])
                                .sum()
                        })
                        .collect()
                })
                .collect();

            for ji in 0..joint {
                let mut rem = ji;
                let mut ps = vec![0.0; kk];
                let mut ts = vec![0.0; kk];
                let mut ok = true;
                for k in 0..kk {
                    let idx = rem % per_cell;
                    rem /= per_cell;
                    ps[k] = pv[k][idx / nt];
                    ts[k] = tv[k][idx % nt];
                    w[k] = ts[k] * ps[k] / (t_block - ts[k]);
                    if active[k] && w[k] * amax[k] > scn.user_max_power * (1.0 + 1e-12) {
                        ok = false;
                    }
                }
                evaluated += choices.iter().map(|c| c.len()).product::<usize>();
                if !ok {
                    continue;
                }
                // Throughput per cell per antenna choice, with rate-floor feasibility.
                for k in 0..kk {
                    rate_sum[k].iter_mut().for_each(|v| *v = 0.0);
                    feasible_n[k].iter_mut().for_each(|v| *v = true);
                    if !active[k] {
                        continue;
                    }
                    let m = scn.antennas[k] as f64;
                    for s in 0..d.subcarriers {
                        if cols[k * d.subcarriers + s] == 0 {
                            continue;
                        }
                        let inter: f64 = (0..kk).filter(|&j| j != k).map(|j| w[j] * load[j][s]).sum();
                        let n0 = inter + scn.noise;
                        let mut after = 0.0;
                        for &u in scn.order[k][s].iter().rev() {
                            if !on(k, u, s) {
                                continue;
                            }
                            let x = scn.harvest[(k, u, s)] * scn.gain[(k, u, s)];
                            let e = scn.harvest[(k, u, s)] * scn.est_noise[(k, u, s)];
                            let intra = if scn.access == AccessMode::Noma { after } else { 0.0 };
                            let gamma = w[k] * x / (w[k] * (intra + e) + n0);
                            after += x;
                            for (ci, &n) in choices[k].iter().enumerate() {
                                let n = n as f64;
                                let r = bw * (1.0 + n * (1.0 + (m / n).ln()) * gamma).ln();
                                rate_sum[k][ci] += r;
                                if r < floor * (1.0 - 1e-9) {
                                    feasible_n[k][ci] = false;
                                }
                            }
                        }
                    }
                }
                let fixed_energy: Vec<f64> = (0..kk)
                    .map(|k| d.devices as f64 * pm.user() * t_block + ps[k] * ts[k] * occ[k])
                    .collect();
                let bs_energy = |k: usize, ci: usize| {
                    if active[k] {
                        pm.bs() * choices[k][ci] as f64 * t_block
                    } else {
                        0.0
                    }
                };
                let thr = |k: usize, ci: usize| (t_block - ts[k]) * rate_sum[k][ci];

                let mut pick = vec![0usize; kk];
                let (value, r_tot, e_tot) = match target {
                    Target::Subtractive(eta) => {
                        let mut ok_all = true;
                        let (mut r_tot, mut e_tot) = (0.0, 0.0);
                        for k in 0..kk {
                            let mut bv = f64::NEG_INFINITY;
                            for ci in 0..choices[k].len() {
                                if !feasible_n[k][ci] {
                                    continue;
                                }
                                let v = thr(k, ci) - eta * bs_energy(k, ci);
                                if v > bv {
                                    bv = v;
                                    pick[k] = ci;
                                }
                            }
                            if bv == f64::NEG_INFINITY {
                                ok_all = false;
                                break;
                            }
                            r_tot += thr(k, pick[k]);
                            e_tot += fixed_energy[k] + bs_energy(k, pick[k]);
                        }
                        if !ok_all {
                            continue;
                        }
                        (r_tot - eta * e_tot, r_tot, e_tot)
                    }
                    Target::Ratio => {
                        let combos: usize = choices.iter().map(|c| c.len()).product();
                        let mut bv = f64::NEG_INFINITY;
                        let mut br = (0.0, 0.0);
                        let mut cur = vec![0usize; kk];
                        for ci in 0..combos {
                            let mut rem = ci;
                            let mut feas = true;
                            for k in 0..kk {
                                cur[k] = rem % choices[k].len();
                                rem /= choices[k].len();
                                feas &= feasible_n[k][cur[k]];
                            }
                            if !feas {
                                continue;
                            }
                            let r: f64 = (0..kk).map(|k| thr(k, cur[k])).sum();
                            let e: f64 = (0..kk).map(|k| fixed_energy[k] + bs_energy(k, cur[k])).sum();
                            let v = r / e;
                            if v > bv {
                                bv = v;
                                br = (r, e);
                                pick.copy_from_slice(&cur);
                            }
                        }
                        if bv == f64::NEG_INFINITY {
                            continue;
                        }
                        (bv, br.0, br.1)
                    }
                };
                if !active.iter().any(|a| *a) {
                    continue;
                }
                if best.as_ref().is_none_or(|b| value > b.value) {
                    best = Some(Best {
                        value,
                        powers: ps.clone(),
                        times: ts.clone(),
                        antennas: (0..kk).map(|k| choices[k][pick[k]]).collect(),
                        pattern: cols.clone(),
                        throughput: r_tot,
                        energy: e_tot,
                    });
                }
            }

            // Next indicator pattern, mixed radix.
            let mut i = 0;
            loop {
                if i == ncols {
                    break 'patterns;
                }
                pattern[i] += 1;
                if pattern[i] < pats.len() {
                    break;
                }
                pattern[i] = 0;
                i += 1;
            }
        }

        let Some(b) = &best else { break };
        for k in 0..kk {
            ranges[k] = (
                around(&pv[k], b.powers[k], p_box(k)),
                around(&tv[k], b.times[k], t_box(k)),
            );
        }
    }

    let b = best.ok_or_else(|| {
        Error::Infeasible("no allocation with an active device meets every constraint".into())
    })?;
    let allocation = Allocation {
        power: b.powers.clone(),
        wpt_time: b.times.clone(),
        antennas: Grid3::from_fn(d, |k, _, _| b.antennas[k] as f64),
        indicator: Grid3::from_fn(d, |k, u, s| {
            if (b.pattern[k * d.subcarriers + s] >> u) & 1 == 1 {
                1.0
            } else {
                0.0
            }
        }),
    };
    Ok(OracleResult {
        allocation,
        value: b.value,
        throughput: b.throughput,
        energy: b.energy,
        ee: b.throughput / b.energy,
        evaluated,
    })
}

/// The exhaustive search as a Dinkelbach inner solver. The previous answer
/// stays a candidate: the zoomed grid moves with η and could otherwise miss a
/// point it already found, which would let `F` dip below zero.
#[derive(Debug, Clone)]
pub struct OracleInner {
    pub grid: GridSpec,
    pub incumbent: Option<Allocation>,
}

impl OracleInner {
    pub fn new(grid: GridSpec) -> Self {
        Self { grid, incumbent: None }
    }
}

impl InnerSolver for OracleInner {
    fn solve(&mut self, scn: &Scenario, eta: f64) -> Result<Allocation> {
        let fresh = search(scn, &self.grid, Target::Subtractive(eta))?;
        let keep = match &self.incumbent {
            Some(old) => subtractive_objective(scn, old, eta)? > fresh.value,
            None => false,
        };
        if !keep {
            self.incumbent = Some(fresh.allocation);
        }
        Ok(self.incumbent.clone().expect("set above"))
    }

    fn tolerance(&self) -> f64 {
        0.0
    }

    fn finalize(&self, _scn: &Scenario, relaxed: &Allocation) -> Result<Allocation> {
        Ok(relaxed.clone())
    }
}
