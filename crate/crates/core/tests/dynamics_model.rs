use nalgebra::{SVector, Vector1, Vector2};
use proptest::prelude::*;

use telesim::dynamics::{
    control_torque, forward_accel, kinetic_energy, passive_output, reduced_accel, skew_residual,
    DynamicsError, JointState, OneDofModel, RobotModel, TwoLinkModel,
};
use telesim::sim::rk4::rk4_step;

type S4 = SVector<f64, 4>;

fn two_link(gravity: bool) -> TwoLinkModel {
    TwoLinkModel::new([1.0, 0.8], [1.0, 0.5], gravity).unwrap()
}

/// Reduced dynamics in `(q, r)` coordinates under a time-varying input.
fn integrate_reduced(model: &dyn RobotModel<2>, x0: S4, input: impl Fn(f64) -> Vector2<f64>, dt: f64, steps: usize) -> Vec<S4> {
    let lambda = Vector2::new(1.0, 1.0);
    let mut x = x0;
    let mut out = vec![x];
    for k in 0..steps {
        x = rk4_step(
            |t, x: S4| {
                let q = Vector2::new(x[0], x[1]);
                let r = Vector2::new(x[2], x[3]);
                let qd = r - lambda.component_mul(&q);
                let rd = reduced_accel(model, &JointState::new(q, qd), &r, &input(t), &Vector2::zeros())?;
                Ok::<_, DynamicsError>(S4::new(qd[0], qd[1], rd[0], rd[1]))
            },
            k as f64 * dt,
            x,
            dt,
        )
        .unwrap();
        out.push(x);
    }
    out
}

#[test]
fn passive_output_is_lossless() {
    // int tau'^T r dt equals the change of 1/2 r^T M r
    let model = two_link(true);
    let input = |t: f64| Vector2::new(0.4 * (1.3 * t).sin(), -0.2 + 0.1 * t.cos());
    let dt = 1e-3;
    let traj = integrate_reduced(&model, S4::new(0.2, -0.5, 0.3, 0.0), input, dt, 5000);
    let storage = |x: &S4| {
        let r = Vector2::new(x[2], x[3]);
        0.5 * r.dot(&(model.inertia(&Vector2::new(x[0], x[1])) * r))
    };
    let power = |k: usize| {
        let x = &traj[k];
        input(k as f64 * dt).dot(&Vector2::new(x[2], x[3]))
    };
    let mut work = 0.0;
    for k in 0..traj.len() - 1 {
        work += 0.5 * dt * (power(k) + power(k + 1));
    }
    let gain = storage(traj.last().unwrap()) - storage(&traj[0]);
    assert!((work - gain).abs() < 1e-6, "work {work} vs storage change {gain}");
}

#[test]
fn full_and_reduced_forms_agree_for_one_joint() {
    let model = OneDofModel::new(2.0).unwrap();
    let lambda = Vector1::new(0.7);
    let tau_bar = |t: f64| Vector1::new((2.0 * t).sin());
    let dt = 1e-3;
    let mut full = Vector2::new(0.5, -0.1);
    let mut red = Vector2::new(0.5, -0.1 + 0.7 * 0.5);
    for k in 0..10_000 {
        let t = k as f64 * dt;
        full = rk4_step(
            |t, x: Vector2<f64>| {
                let st = JointState::new(Vector1::new(x[0]), Vector1::new(x[1]));
                let tau = control_torque(&model, &st, &lambda, &tau_bar(t));
                let a = forward_accel(&model, &st, &tau, &Vector1::zeros())?;
                Ok::<_, DynamicsError>(Vector2::new(x[1], a[0]))
            },
            t,
            full,
            dt,
        )
        .unwrap();
        red = rk4_step(
            |t, x: Vector2<f64>| {
                let qd = x[1] - 0.7 * x[0];
                let st = JointState::new(Vector1::new(x[0]), Vector1::new(qd));
                let rd = reduced_accel(&model, &st, &Vector1::new(x[1]), &tau_bar(t), &Vector1::zeros())?;
                Ok::<_, DynamicsError>(Vector2::new(qd, rd[0]))
            },
            t,
            red,
            dt,
        )
        .unwrap();
        assert!((full[0] - red[0]).abs() < 1e-8);
    }
}

#[test]
fn unforced_arm_without_gravity_conserves_energy() {
    let model = two_link(false);
    let mut x = S4::new(0.3, 1.1, 1.0, -2.0);
    let energy = |x: &S4| kinetic_energy(&model, &JointState::new(Vector2::new(x[0], x[1]), Vector2::new(x[2], x[3])));
    let e0 = energy(&x);
    for k in 0..5000 {
        x = rk4_step(
            |_, x: S4| {
                let st = JointState::new(Vector2::new(x[0], x[1]), Vector2::new(x[2], x[3]));
                let a = forward_accel(&model, &st, &Vector2::zeros(), &Vector2::zeros())?;
                Ok::<_, DynamicsError>(S4::new(x[2], x[3], a[0], a[1]))
            },
            k as f64 * 1e-3,
            x,
            1e-3,
        )
        .unwrap();
    }
    assert!((energy(&x) - e0).abs() < 1e-8 * e0);
}

#[test]
fn constant_input_ramps_the_passive_output() {
    // M = 1, tau' = 1, no coupling: r(t) = r0 + t
    let model = OneDofModel::new(1.0).unwrap();
    let lambda = Vector1::new(1.0);
    let dt = 1e-4;
    let mut x = Vector2::new(0.0, 0.0);
    for k in 0..10_000 {
        x = rk4_step(
            |_, x: Vector2<f64>| {
                let st = JointState::new(Vector1::new(x[0]), Vector1::new(x[1]));
                let r = passive_output(&st, &lambda);
                let rd = reduced_accel(&model, &st, &r, &Vector1::new(1.0), &Vector1::zeros())?;
                Ok::<_, DynamicsError>(Vector2::new(x[1], rd[0] - x[1]))
            },
            k as f64 * dt,
            x,
            dt,
        )
        .unwrap();
        let t = (k + 1) as f64 * dt;
        let r = x[1] + x[0];
        assert!((r - t).abs() < 1e-10, "step {k}: r = {r}, t = {t}");
    }
}

proptest! {
    #[test]
    fn skew_symmetry_holds_everywhere(
        q1 in -3.2f64..3.2, q2 in -3.2f64..3.2,
        qd1 in -3.0f64..3.0, qd2 in -3.0f64..3.0,
        x1 in -1.0f64..1.0, x2 in -1.0f64..1.0,
    ) {
        let model = two_link(true);
        let st = JointState::new(Vector2::new(q1, q2), Vector2::new(qd1, qd2));
        prop_assert!(skew_residual(&model, &st, &Vector2::new(x1, x2), 1e-5).abs() < 1e-6);
    }

    #[test]
    fn passive_output_is_linear(
        q in -5.0f64..5.0, qd in -5.0f64..5.0, p in -5.0f64..5.0, pd in -5.0f64..5.0,
        a in -3.0f64..3.0, lambda in 0.1f64..4.0,
    ) {
        let l = Vector1::new(lambda);
        let s1 = JointState::new(Vector1::new(q), Vector1::new(qd));
        let s2 = JointState::new(Vector1::new(p), Vector1::new(pd));
        let sum = JointState::new(s1.q * a + s2.q, s1.qd * a + s2.qd);
        let lhs = passive_output(&sum, &l)[0];
        let rhs = a * passive_output(&s1, &l)[0] + passive_output(&s2, &l)[0];
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }
}
