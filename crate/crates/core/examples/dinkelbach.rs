//! Dinkelbach's outer loop with ADMM and with the exhaustive search inside.
//!
//! `cargo run --release --example dinkelbach`

use noma_ee::admm::AdmmSettings;
use noma_ee::config::NetworkConfig;
use noma_ee::dinkelbach::{dinkelbach_solve, AdmmInner};
use noma_ee::oracle::{GridSpec, OracleInner};
use noma_ee::scenario::Scenario;

fn main() -> noma_ee::Result<()> {
    let mut cfg = NetworkConfig::with_shape(1, 2, 2, 8);
    cfg.rng_seed = 5;
    let scn = Scenario::build(&cfg)?;

    let mut admm = AdmmInner::new(AdmmSettings::default());
    let a = dinkelbach_solve(&scn, &mut admm, 1e-7, 50)?;
    println!("ADMM inner (effective eps {:.1e}):", a.effective_epsilon);
    for (i, (eta, f)) in a.state.history.iter().enumerate() {
        println!("  {:2}  eta = {:.8}  F = {:+.3e}", i + 1, eta, f);
    }

    let mut oracle = OracleInner::new(GridSpec::new(24, 24, 3));
    let o = dinkelbach_solve(&scn, &mut oracle, 1e-7, 50)?;
    println!("oracle inner: eta* = {:.8} after {} steps", o.eta(), o.state.iteration);
    println!(
        "final EE after rounding: ADMM {:.4}, oracle {:.4} bit/J",
        a.report.ee, o.report.ee
    );
    Ok(())
}
