use hle::flow::{cross_check, CrossCheckOptions};
use hle::params::derive_reduced;
use hle::radial::{decay_limits, profile_distance};
use hle::variational::{initial_guesses, minimize_from, minimize_quotient, SolverOptions};
use hle::{LineGrid, SystemParams};

fn soliton() -> SystemParams {
    SystemParams::new(4, 0.0, 0.0, 4.0, 4.0)
}

#[test]
fn flow_reproduces_the_variational_soliton() {
    let red = derive_reduced(&soliton()).unwrap();
    let grid = LineGrid::new(15.0, 0.01).unwrap();
    let vr = minimize_quotient(&red, &grid, &SolverOptions::default()).unwrap();
    let opts = CrossCheckOptions { window: Some(8.0), ..Default::default() };
    let rep = cross_check(&vr, &opts).unwrap();
    assert!(rep.deviation < 5e-3, "{rep:?}");
    assert!(rep.window >= 8.0);
    assert!(!rep.blew_up_forward && !rep.blew_up_backward);
}

#[test]
fn weighted_limits_vanish_on_a_long_line() {
    // The slowest decay rate of the second configuration is 1/4, hence L = 60.
    for params in [soliton(), SystemParams::new(3, 0.0, 0.0, 4.0, 12.0)] {
        let red = derive_reduced(&params).unwrap();
        let grid = LineGrid::new(60.0, 0.02).unwrap();
        let vr = minimize_quotient(&red, &grid, &SolverOptions::default()).unwrap();
        assert!(vr.converged);
        let d = decay_limits(&vr.pair).unwrap();
        assert!(d.max_sup() < 1e-4, "{params:?} {d:?}");
    }
}

#[test]
fn every_start_finds_the_same_profile() {
    // p = 2: the positive solution is unique up to translation.
    let params = SystemParams::new(4, -1.0, -2.0, 2.0, 4.0);
    let red = derive_reduced(&params).unwrap();
    let grid = LineGrid::new(40.0, 0.02).unwrap();
    let opts = SolverOptions::default();
    let starts = initial_guesses(&grid, 5, 11);
    let sols: Vec<_> = starts.iter().map(|s| minimize_from(&red, &grid, s, &opts).unwrap()).collect();
    for s in &sols {
        assert!(s.converged);
    }
    for s in &sols[1..] {
        let d = profile_distance(&sols[0].pair.g, &s.pair.g);
        assert!(d < 1e-3, "{d}");
        assert!((s.m - sols[0].m).abs() < 1e-6 * sols[0].m);
    }
}

#[test]
fn ground_state_value_is_seed_independent() {
    let red = derive_reduced(&soliton()).unwrap();
    let grid = LineGrid::new(12.0, 0.02).unwrap();
    let m: Vec<f64> = [0u64, 1, 2]
        .iter()
        .map(|&seed| {
            minimize_quotient(&red, &grid, &SolverOptions { seed, multistarts: 3, ..Default::default() })
                .unwrap()
                .m
        })
        .collect();
    for v in &m[1..] {
        assert!((v - m[0]).abs() < 1e-8 * m[0], "{m:?}");
    }
}
