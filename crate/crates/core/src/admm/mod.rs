//! Global-consensus ADMM over cells.
//!
//! Each BS keeps a local copy `P̃_k` of its power next to the global `P_k`.
//! One iteration runs the global step, then every cell's local step against
//! interference summaries frozen at the start of the iteration, then the
//! dual step. The run stops when every `(P̃_k − P_k)² ≤ ε`.

pub mod local;

pub use local::{
    project_capped_simplex, solve_local, Bounds, CellProblem, LocalPoint, LocalSolution,
    PgaSettings, Summary,
};

use crate::config::AccessMode;
use crate::error::{Error, Result};
use crate::grid::Grid3;
use crate::metrics::{self, Allocation};
use crate::scenario::Scenario;
use rayon::prelude::*;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmSettings {
    pub rho: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub local: PgaSettings,
    /// Consecutive growth steps of the smallest residual that count as divergence.
    pub divergence_window: usize,
    /// Charge each cell the marginal rate loss its interference causes elsewhere.
    pub pricing: bool,
    /// Smallest fraction of the way towards the local optima the sweep may take.
    pub min_step: f64,
}

/// Residuals below this multiple of ε never count towards divergence.
pub const DIVERGENCE_FLOOR: f64 = 100.0;

impl Default for AdmmSettings {
    fn default() -> Self {
        Self {
            rho: 0.088,
            epsilon: 1e-7,
            max_iterations: 100,
            local: PgaSettings::default(),
            divergence_window: 10,
            pricing: true,
            min_step: 1.0 / 64.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub global_power: Vec<f64>,
    pub local: Vec<LocalPoint>,
    pub lambda: Vec<f64>,
    pub rho: f64,
    pub iteration: usize,
    /// One entry per finished iteration, one residual per cell.
    pub residual_history: Vec<Vec<f64>>,
    pub summaries: Vec<Summary>,
    pub pricing: bool,
}

impl AdmmState {
    /// λ = 0, local variables at box midpoints, global powers at half the cap.
    pub fn new(scn: &Scenario, rho: f64) -> Self {
        let d = scn.dims;
        let local: Vec<LocalPoint> = (0..d.cells)
            .map(|k| Bounds::of(scn, k).midpoint(d.devices, d.subcarriers))
            .collect();
        let global_power = (0..d.cells)
            .map(|k| {
                let b = Bounds::of(scn, k).power;
                0.5 * (b.0 + b.1)
            })
            .collect();
        let mut st = Self {
            global_power,
            local,
            lambda: vec![0.0; d.cells],
            rho,
            iteration: 0,
            residual_history: Vec::new(),
            summaries: Vec::new(),
            pricing: true,
        };
        st.refresh_summaries(scn, 0.0);
        st
    }

    /// Recomputes every cell's published summary from its current point.
    pub fn refresh_summaries(&mut self, scn: &Scenario, eta: f64) {
        // Generated interference depends only on the cell itself; the
        // sensitivities need the fresh interference, hence two passes.
        for _ in 0..2 {
            let fresh: Vec<Summary> = (0..scn.dims.cells)
                .map(|k| self.problem(scn, k, eta).summary(&self.local[k]))
                .collect();
            self.summaries = fresh;
        }
    }

    /// Local problem of cell `k` against the currently published summaries.
    pub fn problem<'a>(&self, scn: &'a Scenario, k: usize, eta: f64) -> CellProblem<'a> {
        let d = scn.dims;
        let mut p = CellProblem::new(scn, k, eta);
        p.global_power = self.global_power[k];
        p.lambda = self.lambda[k];
        p.rho = self.rho;
        if self.summaries.len() == d.cells {
            for s in 0..d.subcarriers {
                p.external[s] = (0..d.cells)
                    .filter(|&j| j != k)
                    .map(|j| self.summaries[j].interference[s])
                    .sum();
                if !self.pricing {
                    continue;
                }
                p.price[s] = (0..d.cells)
                    .filter(|&j| j != k)
                    .map(|j| self.summaries[j].sensitivity[s])
                    .sum();
            }
        }
        p
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.local
            .iter()
            .zip(&self.global_power)
            .map(|(l, p)| l.power - p)
            .collect()
    }
}

fn inside(scn: &Scenario, k: usize, x: &LocalPoint) -> bool {
    let b = Bounds::of(scn, k);
    let within = |v: f64, (a, c): (f64, f64)| v >= a && v <= c;
    let cols_ok = scn.access == AccessMode::Noma
        || (0..scn.dims.subcarriers).all(|s| {
            (0..scn.dims.devices)
                .map(|u| x.indicator[u * scn.dims.subcarriers + s])
                .sum::<f64>()
                <= 1.0 + 1e-12
        });
    within(x.power, b.power)
        && within(x.wpt_time, b.wpt_time)
        && within(x.antennas, b.antennas)
        && x.indicator.iter().all(|c| (0.0..=1.0).contains(c))
        && cols_ok
}

/// `Σ g_k + Σ λ_k (P̃_k − P_k) + ρ/2 Σ (P̃_k − P_k)²`, with `g_k` the negated
/// local subtractive objective under the interference the current local
/// points actually produce; `+∞` when a local point leaves its box.
pub fn augmented_lagrangian(state: &AdmmState, scn: &Scenario, eta: f64) -> f64 {
    let d = scn.dims;
    if (0..d.cells).any(|k| !inside(scn, k, &state.local[k])) {
        return f64::INFINITY;
    }
    let mut live = AdmmState {
        global_power: state.global_power.clone(),
        local: state.local.clone(),
        lambda: state.lambda.clone(),
        rho: state.rho,
        iteration: state.iteration,
        residual_history: Vec::new(),
        summaries: Vec::new(),
        pricing: false,
    };
    live.refresh_summaries(scn, eta);
    let mut total = 0.0;
    for k in 0..d.cells {
        let x = &live.local[k];
        let mut p = live.problem(scn, k, eta);
        p.lambda = 0.0;
        p.rho = 0.0;
        let gap = x.power - live.global_power[k];
        total += -p.objective(x) + live.lambda[k] * gap + 0.5 * live.rho * gap * gap;
    }
    total
}

/// `P_k = clamp(P̃_k + λ_k/ρ, 0, P_bs,max)`.
pub fn global_update(state: &mut AdmmState, scn: &Scenario) {
    for k in 0..scn.dims.cells {
        let (lo, hi) = Bounds::of(scn, k).power;
        state.global_power[k] = (state.local[k].power + state.lambda[k] / state.rho).clamp(lo, hi);
    }
}

/// `λ_k += ρ (P̃_k − P_k)`.
pub fn multiplier_update(state: &mut AdmmState) {
    let gaps = state.gaps();
    for (l, g) in state.lambda.iter_mut().zip(gaps) {
        *l += state.rho * g;
    }
}

/// `(P̃_k − P_k)²` per cell.
pub fn residual(state: &AdmmState) -> Vec<f64> {
    state.gaps().iter().map(|g| g * g).collect()
}

/// How one local step ended.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOutcome {
    pub point: LocalPoint,
    pub objective: f64,
    pub converged: bool,
}

/// Runs the local step of cell `k`. An inner solve that hits its iteration cap
/// hands back its last iterate with `converged = false`.
pub fn local_update(
    state: &AdmmState,
    k: usize,
    scn: &Scenario,
    eta: f64,
    settings: PgaSettings,
) -> Result<LocalOutcome> {
    let problem = state.problem(scn, k, eta);
    match solve_local(&problem, &state.local[k], settings) {
        Ok(sol) => Ok(LocalOutcome {
            point: sol.point,
            objective: sol.objective,
            converged: true,
        }),
        Err(Error::LocalNotConverged { last, objective, .. }) => Ok(LocalOutcome {
            point: *last,
            objective,
            converged: false,
        }),
        Err(e) => Err(e),
    }
}

/// Moves every cell the same fraction `γ` towards its local optimum, halving
/// `γ` from 1 until the augmented Lagrangian under live interference does
/// not increase. Below `min_step` the points stay where they are.
pub fn jacobi_step(
    state: &mut AdmmState,
    scn: &Scenario,
    eta: f64,
    targets: &[LocalPoint],
    min_step: f64,
) -> f64 {
    let base = state.local.clone();
    let start = augmented_lagrangian(state, scn, eta);
    let slack = 1e-12 * start.abs().max(1.0);
    let mut gamma = 1.0;
    while gamma >= min_step {
        for k in 0..scn.dims.cells {
            let (x, y) = (&base[k], &targets[k]);
            let mix = |a: f64, b: f64| a + gamma * (b - a);
            let mut z = LocalPoint {
                power: mix(x.power, y.power),
                wpt_time: mix(x.wpt_time, y.wpt_time),
                antennas: mix(x.antennas, y.antennas),
                indicator: x.indicator.iter().zip(&y.indicator).map(|(a, b)| mix(*a, *b)).collect(),
            };
            state.problem(scn, k, eta).feasible(&mut z);
            state.local[k] = z;
        }
        if augmented_lagrangian(state, scn, eta) <= start + slack {
            return gamma;
        }
        gamma *= 0.5;
    }
    state.local = base;
    0.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub cell: usize,
    pub local_power: f64,
    pub global_power: f64,
    pub lambda: f64,
    pub residual_sq: f64,
    pub local_objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmOutcome {
    /// Relaxed allocation: local variables with the consensus powers.
    pub allocation: Allocation,
    pub trace: Vec<TraceRow>,
    pub iterations: usize,
    pub converged: bool,
    /// Local solves that stopped at their iteration cap.
    pub unconverged_local_solves: usize,
    pub state: AdmmState,
}

/// Cold-start solve.
pub fn admm_solve(scn: &Scenario, eta: f64, settings: AdmmSettings) -> Result<AdmmOutcome> {
    admm_solve_from(scn, eta, settings, AdmmState::new(scn, settings.rho))
}

/// Solve continuing from `state`.
pub fn admm_solve_from(
    scn: &Scenario,
    eta: f64,
    settings: AdmmSettings,
    mut state: AdmmState,
) -> Result<AdmmOutcome> {
    if !(settings.rho > 0.0) || !(settings.epsilon > 0.0) {
        return Err(Error::Config("ADMM needs rho > 0 and epsilon > 0".into()));
    }
    let d = scn.dims;
    state.rho = settings.rho;
    state.pricing = settings.pricing;
    state.refresh_summaries(scn, eta);
    let mut trace = Vec::new();
    let mut unconverged = 0;
    let mut converged = false;
    let mut growth = 0;
    let mut last_min = f64::INFINITY;
    let mut iterations = 0;

    for it in 1..=settings.max_iterations {
        iterations = it;
        global_update(&mut state, scn);
        let results: Vec<Result<LocalOutcome>> = (0..d.cells)
            .into_par_iter()
            .map(|k| local_update(&state, k, scn, eta, settings.local))
            .collect();
        let mut objectives = vec![0.0; d.cells];
        let mut targets = Vec::with_capacity(d.cells);
        for (k, r) in results.into_iter().enumerate() {
            let out = r?;
            if !out.converged {
                unconverged += 1;
            }
            objectives[k] = out.objective;
            targets.push(out.point);
        }
        jacobi_step(&mut state, scn, eta, &targets, settings.min_step);
        multiplier_update(&mut state);
        state.refresh_summaries(scn, eta);
        state.iteration += 1;
        let res = residual(&state);
        for k in 0..d.cells {
            trace.push(TraceRow {
                iteration: it,
                cell: k,
                local_power: state.local[k].power,
                global_power: state.global_power[k],
                lambda: state.lambda[k],
                residual_sq: res[k],
                local_objective: objectives[k],
            });
        }
        let min = res.iter().cloned().fold(f64::INFINITY, f64::min);
        state.residual_history.push(res.clone());
        if res.iter().all(|r| *r <= settings.epsilon) {
            converged = true;
            break;
        }
        // Drift within a few decades of ε is oscillation, not blow-up.
        if min > last_min && min > DIVERGENCE_FLOOR * settings.epsilon {
            growth += 1;
            if growth >= settings.divergence_window {
                return Err(Error::Divergence {
                    iteration: it,
                    detail: format!(
                        "smallest residual grew for {growth} consecutive iterations to {min:.3e}"
                    ),
                });
            }
        } else {
            growth = 0;
        }
        last_min = min;
    }

    let allocation = assemble(scn, &state);
    Ok(AdmmOutcome {
        allocation,
        trace,
        iterations,
        converged,
        unconverged_local_solves: unconverged,
        state,
    })
}

/// Relaxed allocation from the local points and the global powers.
pub fn assemble(scn: &Scenario, state: &AdmmState) -> Allocation {
    let d = scn.dims;
    let mut antennas = Grid3::filled(d, 1.0);
    let mut indicator = Grid3::filled(d, 0.0);
    for k in 0..d.cells {
        let x = &state.local[k];
        for (slot, v) in antennas.cell_mut(k).iter_mut().zip(std::iter::repeat(x.antennas)) {
            *slot = v;
        }
        indicator.cell_mut(k).copy_from_slice(&x.indicator);
    }
    Allocation {
        power: state.global_power.clone(),
        wpt_time: state.local.iter().map(|x| x.wpt_time).collect(),
        antennas,
        indicator,
    }
}

/// `N = max(1, ⌊N†⌋)`; everything else unchanged.
pub fn round_antennas(alloc: &Allocation) -> Allocation {
    let mut out = alloc.clone();
    for n in out.antennas.as_mut_slice() {
        *n = n.floor().max(1.0);
    }
    out
}

/// Integer allocation from a relaxed one: indicators thresholded at 1/2
/// (OMA keeps the largest entry of each column), antenna counts floored, then
/// the uplink power cap and the rate floor restored by lowering power and
/// switching devices off.
pub fn finalize(scn: &Scenario, relaxed: &Allocation) -> Result<Allocation> {
    let d = scn.dims;
    let mut a = round_antennas(relaxed);
    for k in 0..d.cells {
        for s in 0..d.subcarriers {
            let col: Vec<f64> = (0..d.devices).map(|u| relaxed.indicator[(k, u, s)]).collect();
            let best = match scn.access {
                AccessMode::Oma => {
                    let mut b = 0;
                    for u in 1..d.devices {
                        if col[u] > col[b] {
                            b = u;
                        }
                    }
                    Some(b)
                }
                AccessMode::Noma => None,
            };
            for u in 0..d.devices {
                let on = col[u] >= 0.5 && best.is_none_or(|b| b == u);
                a.indicator[(k, u, s)] = if on { 1.0 } else { 0.0 };
            }
        }
    }
    repair(scn, &mut a)?;
    Ok(a)
}

/// Lowers powers to respect the uplink cap and switches off devices below
/// the rate floor until both hold.
pub fn repair(scn: &Scenario, a: &mut Allocation) -> Result<()> {
    let d = scn.dims;
    for k in 0..d.cells {
        let wit = scn.block - a.wpt_time[k];
        let tau = a.wpt_time[k];
        if tau <= 0.0 {
            continue;
        }
        let amax = (0..d.devices)
            .flat_map(|u| (0..d.subcarriers).map(move |s| (u, s)))
            .filter(|&(u, s)| a.indicator[(k, u, s)] > 0.0)
            .map(|(u, s)| scn.harvest[(k, u, s)])
            .fold(0.0, f64::max);
        if amax > 0.0 {
            let cap = scn.user_max_power * wit / (tau * amax);
            let lo = Bounds::of(scn, k).power.0;
            if a.power[k] > cap {
                if cap >= lo {
                    a.power[k] = cap;
                } else {
                    let limit = scn.user_max_power * wit / (tau * a.power[k]);
                    for u in 0..d.devices {
                        for s in 0..d.subcarriers {
                            if scn.harvest[(k, u, s)] > limit {
                                a.indicator[(k, u, s)] = 0.0;
                            }
                        }
                    }
                }
            }
        }
    }
    let floor = scn.min_rate_bps();
    loop {
        let sinr = metrics::sinrs(scn, a)?;
        let rates = metrics::rates(scn, a, &sinr)?;
        let mut changed = false;
        for ((k, u, s), r) in rates.iter() {
            if a.indicator[(k, u, s)] > 0.0 && *r < floor * (1.0 - 1e-9) {
                a.indicator[(k, u, s)] = 0.0;
                changed = true;
            }
        }
        if !changed {
            return Ok(());
        }
    }
}

/// ADMM trace CSV followed by a `summary` line.
pub fn write_trace_csv<W: Write>(
    trace: &[TraceRow],
    final_ee: f64,
    iterations: usize,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "iteration",
        "cell",
        "local_P",
        "global_P",
        "lambda",
        "residual_sq",
        "local_objective",
    ])?;
    let f = |x: f64| format!("{x:.12e}");
    for r in trace {
        w.write_record([
            r.iteration.to_string(),
            r.cell.to_string(),
            f(r.local_power),
            f(r.global_power),
            f(r.lambda),
            f(r.residual_sq),
            f(r.local_objective),
        ])?;
    }
    w.write_record([
        "summary".to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        format!("iterations={iterations}"),
        format!("ee={}", f(final_ee)),
    ])?;
    w.flush()?;
    Ok(())
}
