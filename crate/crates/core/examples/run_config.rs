//! The full pipeline from a config file, as `noma-ee run` does it.
//!
//! `cargo run --release --example run_config [config.toml] [out_dir]`

use noma_ee::experiment::{self, Overrides};

fn main() -> noma_ee::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/small.toml").into());
    let out = args.next().unwrap_or_else(|| "out/run_config".into());

    let run = experiment::run_scenario(&path, &Overrides::default())?;
    let r = &run.report;
    println!("EE {:.6} bit/J, R {:.4} bit, E {:.4} J", r.ee, r.total_throughput, r.total_energy);
    println!(
        "{} Dinkelbach steps, ADMM iterations per step {:?}",
        run.dinkelbach.state.iteration, run.admm_iterations
    );
    for f in experiment::write_run(&run, &out)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}
