//! Dinkelbach's method for max R/E.
//!
//! Starting from η = 0, each step maximizes `R − ηE` with an inner solver and
//! moves η to the ratio of the returned allocation, until `|R − ηE| ≤ ε`.

use crate::admm::{self, AdmmSettings, AdmmState, TraceRow};
use crate::error::{Error, Result};
use crate::metrics::{self, Allocation, EEReport};
use crate::scenario::Scenario;
use std::io::Write;

/// Maximizer of `R − ηE` for a fixed η.
pub trait InnerSolver {
    fn solve(&mut self, scn: &Scenario, eta: f64) -> Result<Allocation>;

    /// Accuracy the solver can promise on the subtractive objective. Read
    /// again after every solve, so it may depend on what was seen so far.
    fn tolerance(&self) -> f64;

    /// Turns the last relaxed answer into an integer allocation.
    fn finalize(&self, scn: &Scenario, relaxed: &Allocation) -> Result<Allocation> {
        admm::finalize(scn, relaxed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DinkelbachState {
    pub eta: f64,
    pub iteration: usize,
    pub f_value: f64,
    pub converged: bool,
    /// `(eta, F)` per iteration, in order.
    pub history: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DinkelbachOutcome {
    pub state: DinkelbachState,
    /// Allocation of the last inner solve, before rounding.
    pub relaxed: Allocation,
    pub allocation: Allocation,
    pub report: EEReport,
    pub effective_epsilon: f64,
    pub inner_tolerance: f64,
}

impl DinkelbachOutcome {
    pub fn eta(&self) -> f64 {
        self.state.eta
    }
}

/// `R − ηE` of `alloc`.
pub fn subtractive_objective(scn: &Scenario, alloc: &Allocation, eta: f64) -> Result<f64> {
    let sinr = metrics::sinrs(scn, alloc)?;
    let rates = metrics::rates(scn, alloc, &sinr)?;
    Ok(metrics::subtractive_objective(
        metrics::total_throughput(scn, alloc, &rates),
        metrics::total_energy(scn, alloc),
        eta,
    ))
}

fn ratio(scn: &Scenario, alloc: &Allocation) -> Result<(f64, f64)> {
    let sinr = metrics::sinrs(scn, alloc)?;
    let rates = metrics::rates(scn, alloc, &sinr)?;
    Ok((
        metrics::total_throughput(scn, alloc, &rates),
        metrics::total_energy(scn, alloc),
    ))
}

/// Runs at most `max_iterations` outer steps. The tolerance used is
/// `max(epsilon, 10 × inner tolerance)`.
pub fn dinkelbach_solve<S: InnerSolver + ?Sized>(
    scn: &Scenario,
    inner: &mut S,
    epsilon: f64,
    max_iterations: usize,
) -> Result<DinkelbachOutcome> {
    if !(epsilon > 0.0) {
        return Err(Error::Config("Dinkelbach epsilon must be > 0".into()));
    }
    let mut eps = epsilon.max(10.0 * inner.tolerance());
    let mut st = DinkelbachState {
        eta: 0.0,
        iteration: 0,
        f_value: f64::NAN,
        converged: false,
        history: Vec::new(),
    };
    let mut relaxed = None;
    for it in 1..=max_iterations {
        let alloc = inner.solve(scn, st.eta).map_err(|e| Error::Inner {
            iteration: it,
            source: Box::new(e),
        })?;
        let (r, e) = ratio(scn, &alloc)?;
        if !(e > 0.0) {
            return Err(Error::Degenerate("total consumed energy is zero".into()));
        }
        st.iteration = it;
        st.f_value = r - st.eta * e;
        eps = epsilon.max(10.0 * inner.tolerance());
        st.history.push((st.eta, st.f_value));
        relaxed = Some(alloc);
        if st.f_value.abs() <= eps {
            st.converged = true;
            break;
        }
        st.eta = r / e;
    }
    let relaxed = match relaxed {
        Some(a) => a,
        None => inner.solve(scn, st.eta).map_err(|e| Error::Inner {
            iteration: 0,
            source: Box::new(e),
        })?,
    };
    let allocation = inner.finalize(scn, &relaxed)?;
    let report = metrics::energy_efficiency(scn, &allocation)?;
    Ok(DinkelbachOutcome {
        state: st,
        relaxed,
        allocation,
        report,
        effective_epsilon: eps,
        inner_tolerance: inner.tolerance(),
    })
}

/// ADMM as the inner solver; later calls warm-start from the previous state.
/// A fresh answer that scores below the previous one at the new η is
/// discarded in favour of the previous one, so `F ≥ 0` as with an exact
/// solver.
///
/// The local tolerance is a step size in box-normalised coordinates, so what
/// it promises on the objective is relative: the reported tolerance scales it
/// by the throughput of the first answer.
#[derive(Debug, Clone)]
pub struct AdmmInner {
    pub settings: AdmmSettings,
    pub warm_start: bool,
    pub state: Option<AdmmState>,
    pub incumbent: Option<Allocation>,
    /// Objective scale, fixed by the first solve.
    pub scale: f64,
    /// `(dinkelbach iteration, ADMM rows)` for every solve.
    pub traces: Vec<(usize, Vec<TraceRow>)>,
    pub iterations: Vec<usize>,
}

impl AdmmInner {
    pub fn new(settings: AdmmSettings) -> Self {
        Self {
            settings,
            warm_start: true,
            state: None,
            incumbent: None,
            scale: 1.0,
            traces: Vec::new(),
            iterations: Vec::new(),
        }
    }
}

impl InnerSolver for AdmmInner {
    fn solve(&mut self, scn: &Scenario, eta: f64) -> Result<Allocation> {
        let start = match (&self.state, self.warm_start) {
            (Some(s), true) => s.clone(),
            _ => AdmmState::new(scn, self.settings.rho),
        };
        let out = admm::admm_solve_from(scn, eta, self.settings, start)?;
        self.traces.push((self.traces.len() + 1, out.trace));
        self.iterations.push(out.iterations);
        self.state = Some(out.state);
        let fresh = out.allocation;
        if self.incumbent.is_none() {
            let (r, _) = ratio(scn, &fresh)?;
            self.scale = r.max(1.0);
        }
        let keep = match &self.incumbent {
            Some(old) => subtractive_objective(scn, old, eta)? > subtractive_objective(scn, &fresh, eta)?,
            None => false,
        };
        if !keep {
            self.incumbent = Some(fresh);
        }
        Ok(self.incumbent.clone().expect("set above"))
    }

    fn tolerance(&self) -> f64 {
        self.settings.local.tolerance * self.scale
    }
}

/// Dinkelbach trace CSV: `iteration, eta, F_value`.
pub fn write_trace_csv<W: Write>(state: &DinkelbachState, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "eta", "F_value"])?;
    for (i, (eta, f)) in state.history.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            format!("{eta:.12e}"),
            format!("{f:.12e}"),
        ])?;
    }
    w.flush()?;
    Ok(())
}
