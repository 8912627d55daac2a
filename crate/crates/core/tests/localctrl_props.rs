mod common;

use common::{angular_gap_controllable, wilson_by_hand};
use modegraph::localctrl::{is_locally_controllable, sample_sweep, velocity_fan, wilson_interval, SampleSweep, Z_95};
use proptest::prelude::*;

fn coeffs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.1f64..10.0, n)
}

proptest! {
    #[test]
    fn agrees_with_angular_gap_oracle(x in (0.0f64..1.0, 0.0f64..1.0), a in (0.1f64..10.0, 0.1f64..10.0), modes in 1u32..=8) {
        let lp = is_locally_controllable(&[x.0, x.1], &[a.0, a.1], modes);
        prop_assert_eq!(lp, angular_gap_controllable(&[x.0, x.1], &[a.0, a.1], modes, 1e-9));
    }

    #[test]
    fn invariant_under_coefficient_scaling(
        (x, a) in (2usize..5).prop_flat_map(|n| (prop::collection::vec(0.0f64..1.0, n), coeffs(n))),
        c in 0.01f64..100.0,
        modes in 1u32..10,
    ) {
        let scaled: Vec<f64> = a.iter().map(|ai| c * ai).collect();
        prop_assert_eq!(is_locally_controllable(&x, &a, modes), is_locally_controllable(&x, &scaled, modes));
    }

    #[test]
    fn invariant_under_reflection(
        (x, a, axis) in (2usize..5).prop_flat_map(|n| (prop::collection::vec(0.0f64..1.0, n), coeffs(n), 0..n)),
        modes in 1u32..10,
    ) {
        let mut r = x.clone();
        r[axis] = 1.0 - r[axis];
        prop_assert_eq!(is_locally_controllable(&x, &a, modes), is_locally_controllable(&r, &a, modes));
    }

    #[test]
    fn more_modes_never_hurt(
        (x, a) in (2usize..5).prop_flat_map(|n| (prop::collection::vec(0.0f64..1.0, n), coeffs(n))),
        modes in 1u32..12,
    ) {
        if is_locally_controllable(&x, &a, modes) {
            prop_assert!(is_locally_controllable(&x, &a, modes + 1));
        }
    }

    #[test]
    fn needs_more_modes_than_particles(
        (x, a) in (1usize..7).prop_flat_map(|n| (prop::collection::vec(0.0f64..1.0, n), coeffs(n))),
    ) {
        let n = x.len() as u32;
        for modes in 1..=n {
            prop_assert!(!is_locally_controllable(&x, &a, modes));
        }
    }

    #[test]
    fn fan_has_one_vector_per_mode(x in prop::collection::vec(0.0f64..1.0, 1..5), modes in 1u32..10) {
        let a = vec![1.0; x.len()];
        let fan = velocity_fan(&x, &a, modes);
        prop_assert_eq!(fan.vectors.len(), modes as usize);
        for (j, v) in fan.vectors.iter().enumerate() {
            let u = (j + 1) as f64;
            for (vi, xi) in v.iter().zip(&x) {
                prop_assert!((vi - u * (2.0 * std::f64::consts::PI * u * xi).sin()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn wilson_matches_formula(n in 1u64..5000, frac in 0.0f64..=1.0, z in 0.5f64..3.5) {
        let k = ((n as f64) * frac).floor() as u64;
        let (lo, hi) = wilson_interval(k, n, z).unwrap();
        let (elo, ehi) = wilson_by_hand(k as f64, n as f64, z);
        prop_assert!((lo - elo.max(0.0)).abs() < 1e-12 && (hi - ehi.min(1.0)).abs() < 1e-12);
        prop_assert!(0.0 <= lo && lo <= hi && hi <= 1.0);
        let p = k as f64 / n as f64;
        prop_assert!(lo <= p + 1e-15 && p <= hi + 1e-15);
    }
}

#[test]
fn wilson_edge_cases() {
    assert_eq!(wilson_interval(0, 40, Z_95).unwrap().0, 0.0);
    assert_eq!(wilson_interval(40, 40, Z_95).unwrap().1, 1.0);
    assert!(wilson_interval(0, 0, Z_95).is_err());
}

#[test]
fn sampled_sweeps_are_deterministic() {
    let params = SampleSweep {
        samples: 500,
        ..SampleSweep::new(3, 7, 2024)
    };
    let a = serde_json::to_string(&sample_sweep(&params).unwrap()).unwrap();
    let b = serde_json::to_string(&sample_sweep(&params).unwrap()).unwrap();
    assert_eq!(a, b);
    let other = serde_json::to_string(&sample_sweep(&SampleSweep { seed: 2025, ..params }).unwrap()).unwrap();
    assert_ne!(a, other);
}

#[test]
fn a_known_state() {
    let x = [0.1, 0.3];
    let a = [1.0, 4.0];
    let oracle = angular_gap_controllable(&x, &a, 5, 1e-9);
    assert_eq!(is_locally_controllable(&x, &a, 5), oracle);
}
