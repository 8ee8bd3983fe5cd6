//! SINR, rate, energy and EE of a hand-picked allocation, NOMA against OMA.
//!
//! `cargo run --example metrics`

use noma_ee::config::{AccessMode, NetworkConfig};
use noma_ee::metrics::{self, Allocation};
use noma_ee::scenario::Scenario;

fn main() -> noma_ee::Result<()> {
    let mut cfg = NetworkConfig::with_shape(2, 2, 2, 8);
    cfg.rng_seed = 3;
    let scn = Scenario::build(&cfg)?;

    // 10 W for 5 ms in both cells, everyone on, half the array
    let mut a = Allocation::uniform(&scn, 10.0, 5e-3);
    a.antennas = a.antennas.map(|_| 4.0);

    let sinr = metrics::sinrs(&scn, &a)?;
    let rates = metrics::rates(&scn, &a, &sinr)?;
    for ((k, u, s), g) in sinr.iter() {
        println!("cell {k} device {u} sc {s}: sinr {:9.3}  rate {:8.3} bit/s", g, rates[(k, u, s)]);
    }
    let noma = metrics::energy_efficiency(&scn, &a)?;
    println!(
        "\nNOMA: R = {:.3} bit, E = {:.4} J, EE = {:.4} bit/J, constraints {:?}",
        noma.total_throughput,
        noma.total_energy,
        noma.ee,
        noma.constraints.summary()
    );

    // OMA keeps one device per subcarrier
    let mut oma_alloc = a.clone();
    for k in 0..2 {
        for s in 0..2 {
            oma_alloc.indicator[(k, 1 - s, s)] = 0.0;
        }
    }
    let mut oma_scn = scn.clone();
    oma_scn.access = AccessMode::Oma;
    let oma = metrics::oma_mode_metrics(&oma_scn, &oma_alloc)?;
    println!("OMA:  R = {:.3} bit, E = {:.4} J, EE = {:.4} bit/J", oma.total_throughput, oma.total_energy, oma.ee);
    Ok(())
}
