//! Per-cell subproblem: objective, analytic gradient and the projected
//! gradient ascent that maximizes it.
//!
//! A cell sees other cells only through two per-subcarrier numbers frozen at
//! the start of an ADMM iteration: the interference they put on it, and the
//! price `π_s` of the interference it puts on them. All antenna counts of the
//! cell share one relaxed value `n`; rates grow with `n` while the energy term
//! only sees the largest count, so a common value loses nothing.

use crate::config::AccessMode;
use crate::error::{Error, Result};
use crate::scenario::Scenario;
use serde::Serialize;
use std::f64::consts::LN_2;

/// Weight of the rate-floor penalty: a device short of the floor earns
/// `R − μ (R_min − R)² / R_min`, which turns negative about 10% below the
/// floor and so pushes its indicator down.
pub const RATE_PENALTY: f64 = 100.0;

/// Local variables of one cell. `indicator` is device-major, `U × S`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalPoint {
    pub power: f64,
    pub wpt_time: f64,
    pub antennas: f64,
    pub indicator: Vec<f64>,
}

/// What a cell publishes after its local step.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    /// Interference the cell generates on each subcarrier.
    pub interference: Vec<f64>,
    /// Marginal throughput loss of the cell per unit of external interference.
    pub sensitivity: Vec<f64>,
}

/// Everything the local solve of cell `k` depends on.
#[derive(Debug, Clone)]
pub struct CellProblem<'a> {
    pub scn: &'a Scenario,
    pub k: usize,
    pub eta: f64,
    /// External interference per subcarrier.
    pub external: Vec<f64>,
    /// Interference price per subcarrier.
    pub price: Vec<f64>,
    pub global_power: f64,
    pub lambda: f64,
    pub rho: f64,
}

/// Box of the local variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub power: (f64, f64),
    pub wpt_time: (f64, f64),
    pub antennas: (f64, f64),
}

impl Bounds {
    pub fn of(scn: &Scenario, k: usize) -> Self {
        let c = &scn.controls;
        let m = scn.antennas[k] as f64;
        Self {
            power: c
                .fixed_power
                .map_or((0.0, scn.bs_max_power), |p| (p, p)),
            wpt_time: c
                .fixed_wpt_time
                .map_or((0.0, scn.max_wpt_time()), |t| (t, t)),
            antennas: if c.antenna_selection { (1.0, m) } else { (m, m) },
        }
    }

    pub fn midpoint(&self, devices: usize, subcarriers: usize) -> LocalPoint {
        let mid = |(a, b): (f64, f64)| 0.5 * (a + b);
        LocalPoint {
            power: mid(self.power),
            wpt_time: mid(self.wpt_time),
            antennas: mid(self.antennas),
            indicator: vec![0.5; devices * subcarriers],
        }
    }
}

/// Per-device quantities at one point.
struct Eval {
    value: f64,
    rates: Vec<f64>,
    summary: Summary,
}

impl<'a> CellProblem<'a> {
    pub fn new(scn: &'a Scenario, k: usize, eta: f64) -> Self {
        let s = scn.dims.subcarriers;
        Self {
            scn,
            k,
            eta,
            external: vec![0.0; s],
            price: vec![0.0; s],
            global_power: 0.5 * scn.bs_max_power,
            lambda: 0.0,
            rho: 0.0,
        }
    }

    pub fn bounds(&self) -> Bounds {
        Bounds::of(self.scn, self.k)
    }

    fn idx(&self, u: usize, s: usize) -> usize {
        u * self.scn.dims.subcarriers + s
    }

    /// Local objective Λ_k including the consensus terms.
    pub fn objective(&self, x: &LocalPoint) -> f64 {
        self.evaluate(x, None).value
    }

    /// Objective and its gradient.
    pub fn objective_grad(&self, x: &LocalPoint, grad: &mut LocalPoint) -> f64 {
        self.evaluate(x, Some(grad)).value
    }

    /// Rates of the cell's devices at `x`, device-major.
    pub fn rates(&self, x: &LocalPoint) -> Vec<f64> {
        self.evaluate(x, None).rates
    }

    pub fn summary(&self, x: &LocalPoint) -> Summary {
        self.evaluate(x, None).summary
    }

    fn evaluate(&self, x: &LocalPoint, mut grad: Option<&mut LocalPoint>) -> Eval {
        let scn = self.scn;
        let k = self.k;
        let d = scn.dims;
        let t = scn.block;
        let wit = t - x.wpt_time;
        let w = x.wpt_time * x.power / wit;
        let m = scn.antennas[k] as f64;
        let n = x.antennas;
        let l = n * (1.0 + (m / n).ln());
        let dl = (m / n).ln();
        let bw = scn.subcarrier_bandwidth / LN_2;
        let pm = &scn.power_model;
        let noma = scn.access == AccessMode::Noma;
        let floor = scn.min_rate_bps();

        let mut rates = vec![0.0; d.devices * d.subcarriers];
        let mut interference = vec![0.0; d.subcarriers];
        let mut sensitivity = vec![0.0; d.subcarriers];
        let mut throughput_rate = 0.0; // Σ c R
        let mut g_w = 0.0;
        let mut g_n = 0.0;
        let mut occ_total = 0.0;
        let mut price_cost = 0.0;
        let any_active = x.indicator.iter().any(|c| *c > 0.0);

        if let Some(g) = grad.as_deref_mut() {
            g.indicator.clear();
            g.indicator.resize(x.indicator.len(), 0.0);
        }

        for s in 0..d.subcarriers {
            let n0 = self.external[s] + scn.noise;
            let order = &scn.order[k][s];
            // Suffix sums of received power per unit w, in decoding order.
            let mut after = 0.0;
            let mut denoms = vec![0.0; order.len()];
            let mut gammas = vec![0.0; order.len()];
            for (pos, &u) in order.iter().enumerate().rev() {
                let gi = scn.harvest[(k, u, s)] * scn.gain[(k, u, s)];
                let e = scn.harvest[(k, u, s)] * scn.est_noise[(k, u, s)];
                let intra = if noma { after } else { 0.0 };
                let denom = w * (intra + e) + n0;
                denoms[pos] = denom;
                gammas[pos] = w * gi / denom;
                after += x.indicator[self.idx(u, s)] * gi;
            }
            let sum_cx = after;
            interference[s] = w * sum_cx;
            price_cost += self.price[s] * w * sum_cx;

            let mut occ = 0.0;
            let mut arg = usize::MAX;
            for u in 0..d.devices {
                let c = x.indicator[self.idx(u, s)];
                if c > occ {
                    occ = c;
                    arg = u;
                }
            }
            occ_total += occ;

            // Prefix sums of c Φ' R'γ/denom over earlier-decoded devices.
            let mut prefix = 0.0;
            for (pos, &u) in order.iter().enumerate() {
                let i = self.idx(u, s);
                let c = x.indicator[i];
                let gi = scn.harvest[(k, u, s)] * scn.gain[(k, u, s)];
                let gamma = gammas[pos];
                let denom = denoms[pos];
                let q = 1.0 + l * gamma;
                let r = bw * q.ln();
                rates[i] = r;
                let (phi, dphi) = if r < floor {
                    let short = floor - r;
                    (r - RATE_PENALTY * short * short / floor, 1.0 + 2.0 * RATE_PENALTY * short / floor)
                } else {
                    (r, 1.0)
                };
                throughput_rate += c * phi;
                let dr_dg = dphi * bw * l / q;
                sensitivity[s] += wit * c * dr_dg * gamma / denom;
                if let Some(g) = grad.as_deref_mut() {
                    g_w += wit * c * dr_dg * gi * n0 / (denom * denom);
                    g_n += wit * c * dphi * bw * gamma * dl / q;
                    let intra_cost = if noma { w * gi * prefix } else { 0.0 };
                    g.indicator[i] = wit * (phi - intra_cost) - self.price[s] * w * gi;
                    if u == arg {
                        g.indicator[i] -= self.eta * x.power * x.wpt_time;
                    }
                }
                if noma {
                    prefix += c * dr_dg * gamma / denom;
                }
            }
            if grad.is_some() {
                g_w -= self.price[s] * sum_cx;
            }
        }

        let circuit = (if any_active { pm.bs() * n } else { 0.0 } + d.devices as f64 * pm.user()) * t;
        let energy = circuit + x.power * x.wpt_time * occ_total;
        let gap = x.power - self.global_power;
        let value = wit * throughput_rate
            - self.eta * energy
            - price_cost
            - self.lambda * gap
            - 0.5 * self.rho * gap * gap;

        if let Some(g) = grad {
            g.power = g_w * x.wpt_time / wit
                - self.eta * x.wpt_time * occ_total
                - self.lambda
                - self.rho * gap;
            g.wpt_time = g_w * x.power * t / (wit * wit)
                - throughput_rate
                - self.eta * x.power * occ_total;
            g.antennas = g_n - if any_active { self.eta * pm.bs() * t } else { 0.0 };
        }

        Eval {
            value,
            rates,
            summary: Summary {
                interference,
                sensitivity,
            },
        }
    }

    /// Maps a point into the box and the admissible set: box clip, OMA
    /// simplex, then the uplink power cap.
    pub fn feasible(&self, x: &mut LocalPoint) {
        let b = self.bounds();
        let scn = self.scn;
        let d = scn.dims;
        x.power = x.power.clamp(b.power.0, b.power.1);
        x.wpt_time = x.wpt_time.clamp(b.wpt_time.0, b.wpt_time.1);
        x.antennas = x.antennas.clamp(b.antennas.0, b.antennas.1);
        for c in x.indicator.iter_mut() {
            *c = c.clamp(0.0, 1.0);
        }
        if scn.access == AccessMode::Oma {
            for s in 0..d.subcarriers {
                let mut col: Vec<f64> = (0..d.devices).map(|u| x.indicator[self.idx(u, s)]).collect();
                project_capped_simplex(&mut col);
                for (u, v) in col.into_iter().enumerate() {
                    let i = self.idx(u, s);
                    x.indicator[i] = v;
                }
            }
        }

        // Uplink power cap on active devices: w · harvest ≤ P_user,max.
        let wit = scn.block - x.wpt_time;
        if x.wpt_time > 0.0 {
            let a_max = self.max_active_harvest(x);
            if a_max > 0.0 {
                let cap = scn.user_max_power * wit / (x.wpt_time * a_max);
                if x.power > cap {
                    if cap >= b.power.0 {
                        x.power = cap;
                    } else {
                        x.power = b.power.0;
                        let limit = scn.user_max_power * wit / (x.wpt_time * x.power);
                        for u in 0..d.devices {
                            for s in 0..d.subcarriers {
                                if scn.harvest[(self.k, u, s)] > limit {
                                    let i = self.idx(u, s);
                                    x.indicator[i] = 0.0;
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    fn max_active_harvest(&self, x: &LocalPoint) -> f64 {
        let d = self.scn.dims;
        let mut a: f64 = 0.0;
        for u in 0..d.devices {
            for s in 0..d.subcarriers {
                if x.indicator[self.idx(u, s)] > 0.0 {
                    a = a.max(self.scn.harvest[(self.k, u, s)]);
                }
            }
        }
        a
    }
}

/// Euclidean projection onto `{0 ≤ c ≤ 1, Σ c ≤ 1}`.
pub fn project_capped_simplex(c: &mut [f64]) {
    for v in c.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    if c.iter().sum::<f64>() <= 1.0 {
        return;
    }
    // Find θ with Σ clamp(c − θ, 0, 1) = 1 by bisection.
    let orig: Vec<f64> = c.to_vec();
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let s: f64 = orig.iter().map(|v| (v - mid).clamp(0.0, 1.0)).sum();
        if s > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    for (v, o) in c.iter_mut().zip(&orig) {
        *v = (o - hi).clamp(0.0, 1.0);
    }
}

/// Inner solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgaSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PgaSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 500,
        }
    }
}

/// Result of a local solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSolution {
    pub point: LocalPoint,
    pub objective: f64,
    pub iterations: usize,
    pub gradient: f64,
}

/// Normalized coordinates: each variable divided by its box width.
struct Scaling {
    widths: [f64; 3],
}

impl Scaling {
    fn new(b: &Bounds) -> Self {
        let w = |(a, c): (f64, f64)| c - a;
        Self {
            widths: [w(b.power), w(b.wpt_time), w(b.antennas)],
        }
    }

    /// Gradient in normalized coordinates; fixed variables get zero.
    fn scale(&self, g: &mut LocalPoint) {
        g.power *= self.widths[0];
        g.wpt_time *= self.widths[1];
        g.antennas *= self.widths[2];
    }

    /// `x + t · g` where `g` is a normalized direction.
    fn step(&self, x: &LocalPoint, g: &LocalPoint, t: f64) -> LocalPoint {
        LocalPoint {
            power: x.power + t * g.power * self.widths[0],
            wpt_time: x.wpt_time + t * g.wpt_time * self.widths[1],
            antennas: x.antennas + t * g.antennas * self.widths[2],
            indicator: x
                .indicator
                .iter()
                .zip(&g.indicator)
                .map(|(a, b)| a + t * b)
                .collect(),
        }
    }

    /// Normalized displacement between two points, as a flat vector.
    fn diff(&self, a: &LocalPoint, b: &LocalPoint) -> Vec<f64> {
        let q = |x: f64, w: f64| if w > 0.0 { x / w } else { 0.0 };
        let mut v = vec![
            q(a.power - b.power, self.widths[0]),
            q(a.wpt_time - b.wpt_time, self.widths[1]),
            q(a.antennas - b.antennas, self.widths[2]),
        ];
        v.extend(a.indicator.iter().zip(&b.indicator).map(|(x, y)| x - y));
        v
    }
}

fn flat(g: &LocalPoint) -> Vec<f64> {
    let mut v = vec![g.power, g.wpt_time, g.antennas];
    v.extend_from_slice(&g.indicator);
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Projected gradient ascent with Barzilai–Borwein trial steps and Armijo
/// backtracking. Stops when `‖x − map(x + ∇)‖∞ ≤ tol` in normalized
/// coordinates, or when no step improves the objective.
pub fn solve_local(
    problem: &CellProblem<'_>,
    start: &LocalPoint,
    settings: PgaSettings,
) -> Result<LocalSolution> {
    const ARMIJO: f64 = 1e-4;
    let b = problem.bounds();
    let sc = Scaling::new(&b);
    let mut x = start.clone();
    problem.feasible(&mut x);
    let mut g = x.clone();
    let mut f = problem.objective_grad(&x, &mut g);
    if !f.is_finite() {
        return Err(non_finite(&x));
    }
    sc.scale(&mut g);
    let mut t = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut pg = f64::INFINITY;

    for it in 0..settings.max_iterations {
        let mut probe = sc.step(&x, &g, 1.0);
        problem.feasible(&mut probe);
        pg = inf_norm(&sc.diff(&probe, &x));
        if pg <= settings.tolerance {
            return Ok(LocalSolution {
                point: x,
                objective: f,
                iterations: it,
                gradient: pg,
            });
        }
        if let Some((dx, dg)) = &prev {
            // Ascent BB step: s·s / −s·y.
            let sy = -dot(dx, dg);
            if sy > 0.0 {
                t = (dot(dx, dx) / sy).clamp(1e-10, 1e10);
            }
        }
        let gflat = flat(&g);
        let mut accepted = None;
        while t >= 1e-12 {
            let mut y = sc.step(&x, &g, t);
            problem.feasible(&mut y);
            let fy = problem.objective(&y);
            let dxy = sc.diff(&y, &x);
            if fy.is_finite() && fy >= f + ARMIJO * dot(&gflat, &dxy) && fy > f {
                accepted = Some((y, fy, dxy));
                break;
            }
            t *= 0.5;
        }
        let Some((y, fy, dxy)) = accepted else {
            return Ok(LocalSolution {
                point: x,
                objective: f,
                iterations: it,
                gradient: pg,
            });
        };
        let mut gy = y.clone();
        problem.objective_grad(&y, &mut gy);
        sc.scale(&mut gy);
        let dg: Vec<f64> = flat(&gy).iter().zip(&gflat).map(|(a, b)| a - b).collect();
        prev = Some((dxy, dg));
        x = y;
        f = fy;
        g = gy;
        t *= 2.0;
    }
    Err(Error::LocalNotConverged {
        cell: problem.k,
        iterations: settings.max_iterations,
        gradient: pg,
        last: Box::new(x),
        objective: f,
    })
}

fn non_finite(x: &LocalPoint) -> Error {
    let mut p = vec![x.power, x.wpt_time, x.antennas];
    p.extend_from_slice(&x.indicator);
    Error::NonFinite { point: p }
}
