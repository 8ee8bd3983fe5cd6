//! A short distance sweep, seed-averaged.
//!
//! `cargo run --release --example sweep`

use noma_ee::experiment::{self, Overrides, SweepSpec};

fn main() -> noma_ee::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/sweep_distance.toml");
    let mut spec = SweepSpec::load(path)?;
    spec.apply(&Overrides {
        reps: Some(5),
        ..Default::default()
    });
    let rows = experiment::run_sweep(&spec, 2)?;
    println!("{:>8} {:>12} {:>10} {:>4}", "d [m]", "mean EE", "std", "ok");
    for g in experiment::aggregate(&rows) {
        println!("{:8} {:12.4} {:10.4} {:4}", g.value, g.mean_ee, g.std_ee, g.ok);
    }
    experiment::write_aggregate_csv(&spec, &experiment::aggregate(&rows), std::io::stdout())?;
    Ok(())
}
