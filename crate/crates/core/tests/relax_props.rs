use std::f64::consts::PI;

use modegraph::dynamics::{flow_exact, reflect, ModeSequence};
use modegraph::localctrl::velocity_fan;
use modegraph::relax::{
    approximation_error, benchmark_suite, convergence_study, mixed_velocity, simulate_mixed, synthesize_switching,
    MixSignal, ModeMix,
};
use modegraph::simplex::convex_weights;
use proptest::prelude::*;

fn mix(modes: usize) -> impl Strategy<Value = ModeMix> {
    prop::collection::vec(0.0f64..1.0, modes).prop_filter_map("non-zero weights", |raw| {
        let s: f64 = raw.iter().sum();
        if s < 1e-6 {
            return None;
        }
        let mut w: Vec<f64> = raw.iter().map(|r| r / s).collect();
        // Put the rounding residue on the largest weight.
        let resid = 1.0 - w.iter().sum::<f64>();
        let j = (0..w.len()).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap();
        w[j] += resid;
        ModeMix::new(w).ok()
    })
}

proptest! {
    #[test]
    fn mixed_velocity_lies_in_fan_hull(
        x in prop::collection::vec(0.0f64..1.0, 2..4),
        w in (1usize..7).prop_flat_map(mix),
    ) {
        let a: Vec<f64> = (0..x.len()).map(|i| 1.0 + i as f64).collect();
        let v = mixed_velocity(&x, &w, &a);
        let fan = velocity_fan(&x, &a, w.modes());
        prop_assert!(convex_weights(&fan.vectors, &v).is_some());
    }

    #[test]
    fn switched_trajectory_is_chained_exact_flow(
        x0 in prop::collection::vec(0.0f64..1.0, 2),
        w in (2usize..5).prop_flat_map(mix),
        period in 0.01f64..0.3,
    ) {
        let a = [1.0, 4.0];
        let sig = MixSignal::constant(w);
        let sched = synthesize_switching(&sig, period, 1.0).unwrap();
        let end = sched.states_at(&x0, &a, &[1.0]).pop().unwrap();
        let chained = ModeSequence::new(sched.entries.clone(), a.to_vec()).unwrap().apply_exact(&x0);
        prop_assert!(end.distance(&chained) <= 1e-12);
        prop_assert!((sched.total_duration() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn switching_shares_match_weights(w in (1usize..6).prop_flat_map(mix), period in 0.01f64..0.5) {
        let sig = MixSignal::constant(w.clone());
        let sched = synthesize_switching(&sig, period, period).unwrap();
        for (j, &wj) in w.weights().iter().enumerate() {
            let share: f64 = sched.entries.iter().filter(|e| e.0 == j as u32 + 1).map(|e| e.1).sum();
            let expect = if wj < 1e-9 { 0.0 } else { wj * period };
            prop_assert!((share - expect).abs() <= 1e-9);
        }
        prop_assert!(sched.entries.windows(2).all(|e| e[0].0 < e[1].0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mixed_trajectories_commute_with_reflection(
        x0 in prop::collection::vec(0.0f64..1.0, 2),
        w in (2usize..5).prop_flat_map(mix),
        axis in 0usize..2,
    ) {
        let a = [1.0, 4.0];
        let sig = MixSignal::constant(w);
        let direct = simulate_mixed(&reflect(&x0, &[axis]), &sig, &a, 1e-3, 0.5);
        let mirrored = simulate_mixed(&x0, &sig, &a, 1e-3, 0.5);
        for (p, q) in direct.states.iter().zip(&mirrored.states) {
            prop_assert!(p.distance(&reflect(q, &[axis])) <= 1e-8);
        }
    }
}

#[test]
fn vertex_signal_reproduces_exact_flow() {
    let a = [1.0, 4.0];
    for u in 1..=4 {
        let sig = MixSignal::constant(ModeMix::vertex(u, 4).unwrap());
        let traj = simulate_mixed(&[0.3, 0.1], &sig, &a, 1e-4, 1.0);
        assert!(traj.last().distance(&flow_exact(&[0.3, 0.1], u, &a, 1.0)) <= 1e-6);
        assert!(approximation_error(&[0.3, 0.1], &sig, &a, 0.05, 1e-4, 1.0).unwrap() <= 1e-6);
    }
}

#[test]
fn equilibria_of_the_mixture_are_stationary() {
    let sig = MixSignal::constant(ModeMix::new(vec![0.2, 0.3, 0.5]).unwrap());
    let traj = simulate_mixed(&[0.5, 0.5], &sig, &[1.0, 4.0], 1e-3, 2.0);
    assert!(traj.states.iter().all(|x| x.distance(&[0.5, 0.5]) == 0.0));
}

/// Bisection for the zero of the 1D half-half field of modes 1 and 2.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    assert!(f(lo) * f(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn half_half_mixture_has_a_rest_point_between_the_attractors() {
    let w = ModeMix::new(vec![0.5, 0.5]).unwrap();
    let field = |x: f64| mixed_velocity(&[x], &w, &[1.0])[0];
    // Mode 2 attracts to 1/4 and mode 1 to 1/2; the mixture settles in between.
    let rest = bisect(field, 0.26, 0.49);
    assert!((rest - (-0.25f64).acos() / (2.0 * PI)).abs() < 1e-12);
    let end = simulate_mixed(&[0.3], &MixSignal::constant(w.clone()), &[1.0], 1e-3, 10.0);
    assert!((end.last()[0] - rest).abs() < 1e-9);
    let end = simulate_mixed(&[0.27], &MixSignal::constant(w), &[1.0], 1e-3, 10.0);
    assert!((end.last()[0] - rest).abs() < 1e-9);
}

#[test]
fn errors_shrink_under_halving() {
    for case in benchmark_suite() {
        let pts = convergence_study(&case, 0.05, 3).unwrap();
        for w in pts.windows(2) {
            assert!(w[1].error <= 1.1 * w[0].error, "{}", case.name);
        }
    }
}

#[test]
fn fast_switching_limit() {
    let case = &benchmark_suite()[0];
    let period = 1e-4 * case.horizon;
    let e = approximation_error(&case.x0, &case.signal, &case.coefficients, period, 1e-4, case.horizon).unwrap();
    assert!(e < 1e-3, "{e}");
}
