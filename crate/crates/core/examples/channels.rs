//! Channel draws and the link budget they turn into.
//!
//! `cargo run --example channels`

use noma_ee::channel::{self, degradation_coefficient, estimate_channels, generate_channels};
use noma_ee::config::{CsiMode, NetworkConfig};
use noma_ee::scenario::Scenario;

fn main() -> noma_ee::Result<()> {
    let mut cfg = NetworkConfig::with_shape(1, 3, 1, 16);
    cfg.rng_seed = 7;

    let h = generate_channels(&cfg)?;
    let h_hat = estimate_channels(&h, 0.1)?;
    for u in 0..cfg.devices {
        let v = &h.h[(0, u, 0)];
        let e = &h_hat.h_hat[(0, u, 0)];
        println!(
            "device {u}: |h|^2 = {:7.3}  |h_hat|^2 = {:7.3}  degradation = {:.3}",
            channel::norm_sqr(v),
            channel::norm_sqr(e),
            degradation_coefficient(e, 0.1)?
        );
    }

    // Same seed, so the perfect and imperfect scenarios share their draws.
    let perfect = Scenario::build(&cfg)?;
    cfg.csi = CsiMode::Imperfect;
    cfg.estimation_error_variance = 0.1;
    let imperfect = Scenario::build(&cfg)?;
    println!("\npath loss alpha = {:.4e}", perfect.alpha[0][0]);
    println!("decoding order  = {:?}", perfect.order[0][0]);
    for u in 0..cfg.devices {
        println!(
            "device {u}: harvest {:.3e} -> {:.3e}, gain {:.3e} -> {:.3e}, est. noise {:.3e}",
            perfect.harvest[(0, u, 0)],
            imperfect.harvest[(0, u, 0)],
            perfect.gain[(0, u, 0)],
            imperfect.gain[(0, u, 0)],
            imperfect.est_noise[(0, u, 0)],
        );
    }
    Ok(())
}
