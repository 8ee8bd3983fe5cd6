#![allow(dead_code)]

use noma_ee::config::{AccessMode, NetworkConfig};
use noma_ee::grid::Grid3;
use noma_ee::metrics::decoding_order;
use noma_ee::scenario::Scenario;

pub fn build(cells: usize, devices: usize, subcarriers: usize, antennas: usize, seed: u64) -> Scenario {
    let mut cfg = NetworkConfig::with_shape(cells, devices, subcarriers, antennas);
    cfg.rng_seed = seed;
    Scenario::build(&cfg).unwrap()
}

pub fn tiny(seed: u64) -> Scenario {
    build(1, 2, 1, 8, seed)
}

/// Scenario whose link budget is set by hand; decoding order follows `gain`.
pub fn hand(
    dims: (usize, usize, usize),
    antennas: usize,
    harvest: &[f64],
    gain: &[f64],
    noise: f64,
) -> Scenario {
    let (k, u, s) = dims;
    let mut scn = build(k, u, s, antennas, 1);
    let d = scn.dims;
    scn.harvest = Grid3::from_fn(d, |k, u, s| harvest[d.index(k, u, s)]);
    scn.gain = Grid3::from_fn(d, |k, u, s| gain[d.index(k, u, s)]);
    scn.est_noise = Grid3::filled(d, 0.0);
    scn.noise = noise;
    reorder(&mut scn);
    scn
}

pub fn reorder(scn: &mut Scenario) {
    let d = scn.dims;
    scn.order = (0..d.cells)
        .map(|k| {
            (0..d.subcarriers)
                .map(|s| {
                    let g: Vec<f64> = (0..d.devices).map(|u| scn.gain[(k, u, s)]).collect();
                    decoding_order(&g)
                })
                .collect()
        })
        .collect();
}

pub fn with_access(mut scn: Scenario, access: AccessMode) -> Scenario {
    scn.access = access;
    scn
}
