//! Ground-truth tools: exhaustive search, numerical Hessians, Monte Carlo.
//!
//! `cargo run --release --example oracle`

use noma_ee::config::NetworkConfig;
use noma_ee::metrics::{self, Allocation};
use noma_ee::oracle::{self, GridSpec};
use noma_ee::scenario::Scenario;

fn main() -> noma_ee::Result<()> {
    let mut cfg = NetworkConfig::with_shape(1, 2, 1, 8);
    cfg.rng_seed = 2;
    let scn = Scenario::build(&cfg)?;

    let best = oracle::brute_force_optimum(&scn, &GridSpec::new(24, 24, 3))?;
    let a = &best.allocation;
    println!(
        "best EE {:.4} bit/J at P = {:.3} W, tau = {:.3e} s, N = {:?}, c = {:?} ({} tuples)",
        best.ee,
        a.power[0],
        a.wpt_time[0],
        a.antennas.as_slice(),
        a.indicator.as_slice(),
        best.evaluated
    );

    // Throughput Hessian in (P, tau) around the optimum
    let f = |x: &[f64]| {
        let mut b = Allocation { power: vec![x[0]], wpt_time: vec![x[1]], ..a.clone() };
        b.antennas = a.antennas.clone();
        let g = metrics::sinrs(&scn, &b).unwrap();
        let r = metrics::rates(&scn, &b, &g).unwrap();
        metrics::total_throughput(&scn, &b, &r)
    };
    let x = [a.power[0], a.wpt_time[0].max(1e-3)];
    let h = oracle::numerical_hessian(f, &x, &oracle::default_steps(&[scn.bs_max_power, 1.0]))?;
    println!("Hessian eigenvalues of R in (P, tau): {:?}", oracle::eigenvalues(&h));

    for m in [64, 256, 1024] {
        let c = oracle::trimmed_sum_distribution_check(m, m / 4, 50_000, 1)?;
        println!(
            "top {:4} of {:4}: mean {:9.3} vs {:9.3}, variance {:8.3} vs {:8.3}",
            m / 4,
            m,
            c.empirical_mean,
            c.reference_mean,
            c.empirical_variance,
            c.reference_variance
        );
    }
    Ok(())
}
