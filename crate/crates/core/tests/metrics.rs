mod common;

use approx::assert_relative_eq;
use noma_ee::config::{AccessMode, CsiMode, NetworkConfig};
use noma_ee::error::Error;
use noma_ee::grid::Grid3;
use noma_ee::metrics::*;
use noma_ee::scenario::Scenario;
use proptest::prelude::*;

// tx powers (1, 2), gains (4, 1), σ² = 0.5.
fn sinr_case() -> (Scenario, Allocation) {
    let scn = common::hand((1, 2, 1), 1, &[1.0, 2.0], &[4.0, 1.0], 0.5);
    let alloc = Allocation::uniform(&scn, 1.0, 0.5);
    (scn, alloc)
}

#[test]
fn decoding_order_examples() {
    assert_eq!(decoding_order(&[0.2, 0.9, 0.5]), vec![1, 2, 0]);
    assert_eq!(decoding_order(&[0.3, 0.3, 0.3]), vec![0, 1, 2]);
}

#[test]
fn hand_sinr() {
    let (scn, alloc) = sinr_case();
    let tx = transmit_powers(&scn, &alloc).unwrap();
    assert_relative_eq!(tx[(0, 0, 0)], 1.0);
    assert_relative_eq!(tx[(0, 1, 0)], 2.0);
    let g = sinrs(&scn, &alloc).unwrap();
    assert_relative_eq!(g[(0, 0, 0)], 1.6, max_relative = 1e-12);
    assert_relative_eq!(g[(0, 1, 0)], 4.0, max_relative = 1e-12);
    let last = sinr_terms(&scn, &alloc, &tx, 0, 1, 0);
    assert_eq!(last.intra, 0.0);
    assert_eq!(last.inter, 0.0);
}

#[test]
fn hand_sinr_imperfect() {
    let (mut scn, alloc) = sinr_case();
    // α = 1, σ_e² = 0.5.
    scn.est_noise = Grid3::filled(scn.dims, 0.5);
    let g = sinrs(&scn, &alloc).unwrap();
    assert_relative_eq!(g[(0, 0, 0)], 4.0 / 3.0, max_relative = 1e-12);
}

#[test]
fn silent_interferers_leave_signal_over_noise() {
    let (scn, mut alloc) = sinr_case();
    alloc.indicator[(0, 1, 0)] = 0.0;
    let g = sinrs(&scn, &alloc).unwrap();
    assert_relative_eq!(g[(0, 0, 0)], 4.0 / 0.5, max_relative = 1e-12);
}

#[test]
fn zero_error_imperfect_matches_perfect() {
    let mut cfg = NetworkConfig::with_shape(2, 2, 2, 8);
    let perfect = Scenario::build(&cfg).unwrap();
    cfg.csi = CsiMode::Imperfect;
    cfg.estimation_error_variance = 0.0;
    let imperfect = Scenario::build(&cfg).unwrap();
    let a = Allocation::uniform(&perfect, 10.0, 0.3);
    assert_eq!(sinrs(&perfect, &a).unwrap(), sinrs(&imperfect, &a).unwrap());
}

#[test]
fn large_error_variance_bounds_sinr() {
    let mut cfg = NetworkConfig::with_shape(1, 2, 1, 8);
    cfg.csi = CsiMode::Imperfect;
    for s in [0.1, 1.0, 10.0, 100.0] {
        cfg.estimation_error_variance = s;
        let scn = Scenario::build(&cfg).unwrap();
        let a = Allocation::uniform(&scn, 10.0, 0.3);
        let g = sinrs(&scn, &a).unwrap();
        for ((k, u, s), v) in g.iter() {
            assert!(*v <= scn.gain[(k, u, s)] / scn.est_noise[(k, u, s)]);
        }
    }
}

#[test]
fn rate_examples() {
    assert_relative_eq!(rate(64, 16.0, 0.1, 1.0).unwrap(), 2.2684, max_relative = 1e-4);
    assert_eq!(rate(64, 16.0, 0.0, 1.0).unwrap(), 0.0);
    assert_relative_eq!(
        rate(32, 32.0, 0.2, 2.0).unwrap(),
        2.0 * (1.0f64 + 0.2 * 32.0).log2(),
        max_relative = 1e-12
    );
    assert!(matches!(rate(8, 0.5, 1.0, 1.0), Err(Error::Domain(_))));
    assert!(matches!(rate(8, 9.0, 1.0, 1.0), Err(Error::Domain(_))));
}

#[test]
fn throughput_example() {
    let scn = common::hand((1, 2, 1), 1, &[1.0, 1.0], &[1.0, 1.0], 1.0);
    let a = Allocation::uniform(&scn, 1.0, 0.5);
    let rates = Grid3::from_fn(scn.dims, |_, u, _| [2.0, 1.0][u]);
    assert_relative_eq!(total_throughput(&scn, &a, &rates), 1.5);

    let mut off = a.clone();
    off.indicator = Grid3::filled(scn.dims, 0.0);
    assert_eq!(total_throughput(&scn, &off, &rates), 0.0);
    let mut full = a;
    full.wpt_time = vec![scn.block];
    assert_eq!(total_throughput(&scn, &full, &rates), 0.0);
}

#[test]
fn energy_examples() {
    let scn = common::build(1, 15, 1, 30, 1);
    let a = Allocation::uniform(&scn, 0.0, 0.3);
    assert_relative_eq!(total_energy(&scn, &a), 3.021, max_relative = 1e-12);

    let mut zero = scn.clone();
    zero.block = 0.0;
    assert_eq!(total_energy(&zero, &Allocation::uniform(&zero, 1.0, 0.0)), 0.0);
}

#[test]
fn ee_and_subtractive_examples() {
    assert_relative_eq!(1.5 / 3.021, 0.4965, max_relative = 1e-4);
    assert_relative_eq!(subtractive_objective(1.5, 3.021, 0.3), 0.5937, max_relative = 1e-4);
    assert_eq!(subtractive_objective(1.5, 3.021, 0.0), 1.5);
    assert_eq!(subtractive_objective(1.5, 3.0, 0.5), 0.0);
}

#[test]
fn ee_report_edge_cases() {
    let scn = common::tiny(3);
    let mut a = Allocation::uniform(&scn, 10.0, 0.2);
    a.indicator = Grid3::filled(scn.dims, 0.0);
    assert_eq!(energy_efficiency(&scn, &a).unwrap().ee, 0.0);

    let mut dead = scn.clone();
    dead.power_model = noma_ee::config::PowerModel {
        dac: 0.0,
        mix: 0.0,
        filt: 0.0,
        filr: 0.0,
        lna: 0.0,
        ifa: 0.0,
        adc: 0.0,
        syn: 0.0,
    };
    assert!(matches!(energy_efficiency(&dead, &a), Err(Error::Degenerate(_))));
}

#[test]
fn constraint_examples() {
    let scn = common::tiny(4);
    let lower = Allocation {
        power: vec![0.0],
        wpt_time: vec![0.0],
        antennas: Grid3::filled(scn.dims, 1.0),
        indicator: Grid3::filled(scn.dims, 0.0),
    };
    let r = energy_efficiency(&scn, &lower).unwrap();
    assert!(r.feasible());

    let mut hot = Allocation::uniform(&scn, scn.bs_max_power + 1e-3, 0.01);
    let rates = rates(&scn, &hot, &sinrs(&scn, &hot).unwrap()).unwrap();
    assert!(!check_constraints(&scn, &hot, &rates).c1[0]);
    hot.power[0] = scn.bs_max_power;
    let rates = noma_ee::metrics::rates(&scn, &hot, &sinrs(&scn, &hot).unwrap()).unwrap();
    assert!(check_constraints(&scn, &hot, &rates).c1[0]);

    // A 0.05 bit/s device against a 0.1 bit/s/Hz floor.
    let a = Allocation::uniform(&scn, 1.0, 0.5);
    let slow = Grid3::filled(scn.dims, 0.05 * scn.subcarrier_bandwidth);
    assert!(!check_constraints(&scn, &a, &slow).c4[(0, 0, 0)]);
}

#[test]
fn oma_metrics() {
    let scn = common::build(1, 2, 2, 8, 5);
    let mut a = Allocation::uniform(&scn, 10.0, 0.2);
    assert!(matches!(oma_mode_metrics(&scn, &a), Err(Error::Mode(_))));

    // Device 0 on subcarrier 0, device 1 on subcarrier 1.
    a.indicator = Grid3::from_fn(scn.dims, |_, u, s| if u == s { 1.0 } else { 0.0 });
    let oma = oma_mode_metrics(&scn, &a).unwrap();
    let noma = energy_efficiency(&scn, &a).unwrap();
    for u in 0..2 {
        assert_eq!(oma.sinr[(0, u, u)], noma.sinr[(0, u, u)]);
    }
}

#[test]
fn oracle_noma_beats_oma_on_throughput() {
    use noma_ee::oracle::grid::{brute_force_optimum, GridSpec};
    let scn = common::build(1, 2, 2, 4, 6);
    let grid = GridSpec::new(12, 12, 1);
    let noma = brute_force_optimum(&scn, &grid).unwrap();
    let oma = brute_force_optimum(&common::with_access(scn, AccessMode::Oma), &grid).unwrap();
    assert!(noma.ee >= oma.ee * (1.0 - 1e-12));
}

fn random_alloc(scn: &Scenario, x: &[f64]) -> Allocation {
    let d = scn.dims;
    let mut it = x.iter().cycle();
    let mut next = || *it.next().unwrap();
    Allocation {
        power: (0..d.cells).map(|_| next() * scn.bs_max_power).collect(),
        wpt_time: (0..d.cells).map(|_| 0.05 + 0.9 * next()).collect(),
        antennas: Grid3::from_fn(d, |k, _, _| 1.0 + next() * (scn.antennas[k] as f64 - 1.0)),
        indicator: Grid3::from_fn(d, |_, _, _| next()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ee_identity(seed in 0u64..1000, x in prop::collection::vec(0.0f64..1.0, 16)) {
        let scn = common::build(2, 2, 2, 8, seed);
        let a = random_alloc(&scn, &x);
        let r = energy_efficiency(&scn, &a).unwrap();
        prop_assert!((r.ee * r.total_energy - r.total_throughput).abs() <= 1e-9 * r.total_throughput.max(1e-300));
    }

    #[test]
    fn rate_increasing_in_sinr(m in 1usize..512, f in 0.0f64..1.0, g in 0.0f64..100.0, dg in 1e-6f64..10.0) {
        let n = 1.0 + f * (m as f64 - 1.0);
        prop_assert!(rate(m, n, g + dg, 1.0).unwrap() > rate(m, n, g, 1.0).unwrap());
    }

    #[test]
    fn last_decoded_has_no_intra(seed in 0u64..1000, x in prop::collection::vec(0.0f64..1.0, 16)) {
        let scn = common::build(1, 3, 2, 8, seed);
        let a = random_alloc(&scn, &x);
        let tx = transmit_powers(&scn, &a).unwrap();
        for s in 0..2 {
            let last = *scn.order[0][s].last().unwrap();
            prop_assert_eq!(sinr_terms(&scn, &a, &tx, 0, last, s).intra, 0.0);
        }
    }

    #[test]
    fn equal_gain_permutation_keeps_sinr(g in 0.1f64..10.0, top in 0.1f64..10.0, perm in 0usize..6) {
        // Harvest tracks the gain as it does under one path loss; two devices tie.
        let gains = [top, g, g];
        let p = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]][perm];
        let permuted: Vec<f64> = p.iter().map(|&i| gains[i]).collect();
        let harvest = |v: &[f64]| v.iter().map(|x| 0.5 * x).collect::<Vec<_>>();
        let scn = common::hand((1, 3, 1), 1, &harvest(&gains), &gains, 0.3);
        let other = common::hand((1, 3, 1), 1, &harvest(&permuted), &permuted, 0.3);
        let a = Allocation::uniform(&scn, 1.0, 0.5);
        let x = sinrs(&scn, &a).unwrap();
        let y = sinrs(&other, &a).unwrap();
        let mut xs = x.as_slice().to_vec();
        let mut ys = y.as_slice().to_vec();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        for (a, b) in xs.iter().zip(&ys) {
            prop_assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn perfect_csi_dominates(seed in 0u64..1000, sigma in 0.01f64..1.0, p in 1.0f64..39.0, tau in 0.05f64..0.95) {
        let mut cfg = NetworkConfig::with_shape(2, 2, 2, 16);
        cfg.rng_seed = seed;
        let perfect = Scenario::build(&cfg).unwrap();
        cfg.csi = CsiMode::Imperfect;
        cfg.estimation_error_variance = sigma;
        let imperfect = Scenario::build(&cfg).unwrap();
        let a = Allocation::uniform(&perfect, p, tau);
        let tx = transmit_powers(&imperfect, &a).unwrap();
        for ((k, u, s), _) in tx.iter() {
            let t = sinr_terms(&imperfect, &a, &tx, k, u, s);
            // Same signal and interference, strictly more noise.
            let clean = SinrTerms { estimation: 0.0, ..t };
            prop_assert!(t.sinr() <= clean.sinr());
            prop_assert!(t.estimation > 0.0);
        }
    }

    #[test]
    fn rate_unimodal_in_n(m in 2usize..1024, g in 1e-4f64..10.0) {
        let r: Vec<f64> = (0..=200)
            .map(|i| rate_unchecked(m as f64, 1.0 + (m as f64 - 1.0) * i as f64 / 200.0, g, 1.0))
            .collect();
        let ups = r.windows(2).map(|w| w[1] >= w[0] - 1e-12).collect::<Vec<_>>();
        let first_down = ups.iter().position(|u| !u).unwrap_or(ups.len());
        prop_assert!(ups[first_down..].iter().all(|u| !u) || ups[first_down..].is_empty());
    }
}
