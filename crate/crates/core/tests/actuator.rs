use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector, RowDVector};
use proptest::prelude::*;

use paractl::actuator::{
    closed_loop_poles, feedforward_step, open_loop_command, pd_gains, pd_gains_unchecked, simulate_single_actuator,
    stability_check, standard_masses, ActuatorModel, ControllerGains, DerivativeStack,
};

fn stack(v: &[f64]) -> DerivativeStack {
    DerivativeStack(v.to_vec())
}

#[test]
fn critically_damped_pd() {
    let g = pd_gains(4.0, 4.0, 0.0, 0.1).unwrap();
    for m in [0.1, 1.0, f64::INFINITY] {
        for p in closed_loop_poles(&g, &ActuatorModel::ideal(0.0), m).unwrap() {
            assert!((p.re + 2.0).abs() < 1e-6 && p.im.abs() < 1e-6, "{p}");
        }
    }
}

#[test]
fn back_emf_adds_damping() {
    let g = pd_gains(4.0, 4.0, 0.5, 0.1).unwrap();
    let mut poles = closed_loop_poles(&g, &ActuatorModel::ideal(0.5), 1.0).unwrap();
    poles.sort_by(|a, b| a.re.total_cmp(&b.re));
    // λ² + 4.5λ + 4
    let disc = (4.5f64 * 4.5 - 16.0).sqrt();
    assert_relative_eq!(poles[0].re, (-4.5 - disc) / 2.0, epsilon = 1e-10);
    assert_relative_eq!(poles[1].re, (-4.5 + disc) / 2.0, epsilon = 1e-10);
}

#[test]
fn undamped_pd_fails() {
    let g = pd_gains_unchecked(1.0, 0.0, 0.0, 0.1).unwrap();
    let report = stability_check(&g, &ActuatorModel::ideal(0.0), &standard_masses(0.1)).unwrap();
    assert!(!report.passed());
    for e in &report.entries {
        for p in &e.poles {
            assert!(p.re.abs() < 1e-9 && (p.im.abs() - 1.0).abs() < 1e-9, "{p}");
        }
    }
    assert!(pd_gains(1.0, 0.0, 0.0, 0.1).is_err());
}

#[test]
fn open_loop_examples() {
    let g = pd_gains(4.0, 4.0, 0.5, 0.1).unwrap();
    assert_relative_eq!(open_loop_command(&g, 2.0, &stack(&[0.0, 2.0, 1.0])).unwrap(), 3.0);
    assert_eq!(open_loop_command(&g, 2.0, &stack(&[5.0, 0.0, 0.0])).unwrap(), 0.0);
    let ideal = pd_gains(4.0, 4.0, 0.0, 0.1).unwrap();
    assert_relative_eq!(open_loop_command(&ideal, 0.1, &stack(&[0.0, 0.0, 1.0])).unwrap(), 0.1);
    assert!(open_loop_command(&g, 0.05, &stack(&[0.0, 0.0, 1.0])).is_err());
}

#[test]
fn feedforward_examples() {
    let g = pd_gains(4.0, 4.0, 0.0, 0.1).unwrap();
    let x = DVector::zeros(0);
    let (a, _) = feedforward_step(&g, &x, &stack(&[0.1, 0.0]), &stack(&[0.0, 0.0, 0.0]), 1.0, 1e-3).unwrap();
    assert_relative_eq!(a, 0.4);

    let g = pd_gains(4.0, 4.0, 0.5, 0.1).unwrap();
    let (a, _) = feedforward_step(&g, &x, &stack(&[0.0, 0.0]), &stack(&[0.0, 2.0, 1.0]), 2.0, 1e-3).unwrap();
    assert_relative_eq!(a, 1.0 + 0.25 * 2.0);
}

#[test]
fn integral_state_grows_linearly() {
    let g = ControllerGains::new(
        DMatrix::zeros(1, 1),
        DVector::from_vec(vec![1.0]),
        RowDVector::from_vec(vec![1.0]),
        RowDVector::from_vec(vec![4.0, 4.0]),
        0.0,
        0.1,
    )
    .unwrap();
    let e = stack(&[0.2, 0.0]);
    let r = stack(&[0.0, 0.0, 0.0]);
    let (_, x1) = feedforward_step(&g, &DVector::from_vec(vec![0.5]), &e, &r, 1.0, 0.01).unwrap();
    assert_relative_eq!(x1[0], 0.5 + 0.2 * 0.01, epsilon = 1e-15);
    let (a, _) = feedforward_step(&g, &x1, &e, &r, 1.0, 0.01).unwrap();
    assert_relative_eq!(a, x1[0] + 4.0 * 0.2, epsilon = 1e-15);
}

#[test]
fn pd_error_does_not_depend_on_mass() {
    let g = pd_gains(4.0, 4.0, 0.0, 0.1).unwrap();
    let model = ActuatorModel::ideal(0.0);
    let step = |_: f64| stack(&[0.1, 0.0, 0.0]);
    let light = simulate_single_actuator(&g, &model, 0.1, &step, [0.0, 0.0], 1e-3, 5.0).unwrap();
    let heavy = simulate_single_actuator(&g, &model, 10.0, &step, [0.0, 0.0], 1e-3, 5.0).unwrap();
    assert_eq!(light.error.len(), heavy.error.len());
    for (a, b) in light.error.iter().zip(&heavy.error) {
        assert!((a - b).abs() <= 1e-9);
    }
}

#[test]
fn step_follows_critical_envelope() {
    let g = pd_gains(4.0, 4.0, 0.0, 0.1).unwrap();
    let step = |_: f64| stack(&[0.1, 0.0, 0.0]);
    let run = simulate_single_actuator(&g, &ActuatorModel::ideal(0.0), 0.5, &step, [0.0, 0.0], 1e-3, 5.0).unwrap();
    for (t, e) in run.t.iter().zip(&run.error) {
        let envelope = 0.1 * (1.0 + 2.0 * t) * (-2.0 * t).exp();
        assert!((e - envelope).abs() <= 1e-3 * 0.1, "t = {t}: {e} vs {envelope}");
        if *t >= 3.0 {
            assert!(e.abs() < 0.02 * 0.1);
        }
    }
}

#[test]
fn ramp_is_tracked_without_offset() {
    let (k0, m) = (0.5, 0.4);
    let g = pd_gains(4.0, 4.0, k0, 0.1).unwrap();
    let ramp = |t: f64| stack(&[0.5 * t, 0.5, 0.0]);
    // slowest pole is near −0.93, so give it time
    let run = simulate_single_actuator(&g, &ActuatorModel::ideal(k0), m, &ramp, [0.0, 0.0], 1e-3, 25.0).unwrap();
    assert!(run.error.iter().copied().fold(0.0f64, |a, e| a.max(e.abs())) > 1e-2);
    assert!(run.error.last().unwrap().abs() <= 1e-6, "{}", run.error.last().unwrap());
}

#[test]
fn standard_sweep() {
    assert_eq!(standard_masses(0.1), vec![0.1, 0.2, 1.0, f64::INFINITY]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn positive_pd_is_stable_for_every_mass(kp in 0.1..50.0f64, kd in 0.1..20.0f64, k0 in 0.0..2.0f64, m0 in 0.01..1.0f64) {
        let g = pd_gains(kp, kd, k0, m0).unwrap();
        let report = stability_check(&g, &ActuatorModel::ideal(k0), &standard_masses(m0)).unwrap();
        prop_assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn third_order_agrees_with_routh_hurwitz(c2 in 0.001..1.0f64, kp in 0.1..50.0f64, kd in 0.1..20.0f64,
                                             k0 in 0.0..2.0f64, m in 0.05..5.0f64) {
        // c₂ s³ + s² + (Kd + k₀/m) s + Kp
        let (a3, a2, a1, a0) = (c2, 1.0, kd + k0 / m, kp);
        let margin = a2 * a1 - a3 * a0;
        prop_assume!(margin.abs() > 1e-6 * (a2 * a1).max(a3 * a0));
        let model = ActuatorModel { c: vec![c2], k: vec![k0], c_tilde: Vec::new() };
        let g = pd_gains(kp, kd, k0, 0.05).unwrap();
        let report = stability_check(&g, &model, &[m]).unwrap();
        prop_assert_eq!(report.passed(), margin > 0.0);
    }

    #[test]
    fn open_loop_is_linear_in_reference(m in 0.1..5.0f64, v in -3.0..3.0f64, a in -3.0..3.0f64, k0 in 0.0..1.0f64) {
        let g = pd_gains(1.0, 1.0, k0, 0.1).unwrap();
        let f = open_loop_command(&g, m, &stack(&[0.0, v, a])).unwrap();
        prop_assert!((f - (m * a + k0 * v)).abs() < 1e-12);
    }
}
