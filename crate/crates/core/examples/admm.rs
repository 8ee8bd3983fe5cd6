//! One consensus-ADMM solve of `max R − ηE` on two cells, then rounding.
//!
//! `cargo run --release --example admm`

use noma_ee::admm::{self, AdmmSettings};
use noma_ee::config::NetworkConfig;
use noma_ee::metrics;
use noma_ee::scenario::Scenario;

fn main() -> noma_ee::Result<()> {
    let mut cfg = NetworkConfig::with_shape(2, 2, 2, 16);
    cfg.rng_seed = 11;
    let scn = Scenario::build(&cfg)?;
    let eta = 2.0;

    let out = admm::admm_solve(&scn, eta, AdmmSettings::default())?;
    println!("converged = {} after {} iterations", out.converged, out.iterations);
    println!("iter cell       P_local      P_global      lambda    residual^2");
    for r in out.trace.iter().take(12) {
        println!(
            "{:4} {:4} {:13.6} {:13.6} {:11.3e} {:13.3e}",
            r.iteration, r.cell, r.local_power, r.global_power, r.lambda, r.residual_sq
        );
    }

    let a = admm::finalize(&scn, &out.allocation)?;
    let rep = metrics::energy_efficiency(&scn, &a)?;
    println!("\nrounded: P = {:?}, tau = {:?}", a.power, a.wpt_time);
    println!("EE = {:.4} bit/J, R - eta E = {:.4}, feasible = {}", rep.ee, rep.subtractive(eta), rep.feasible());

    let mut csv = Vec::new();
    admm::write_trace_csv(&out.trace, rep.ee, out.iterations, &mut csv)?;
    println!("trace CSV: {} lines", String::from_utf8_lossy(&csv).lines().count());
    Ok(())
}
