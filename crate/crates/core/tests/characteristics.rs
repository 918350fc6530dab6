use coldplasma::analysis::constant_q_closed_form;
use coldplasma::characteristics::*;
use coldplasma::integrator::{integrate, OdeProblem};
use coldplasma::{BlowupStatus, DopingProfile, InitialData, Tolerances};

fn ex2() -> DopingProfile {
    DopingProfile::lorentz_bump(0.3).unwrap()
}

fn state_at<F>(f: F, t: f64) -> Vec<f64>
where
    F: Fn(f64) -> CharacteristicRun,
{
    let run = f(t);
    assert!((run.trajectory.t_last() - t).abs() < 1e-12);
    run.trajectory.last_state().to_vec()
}

#[test]
fn lorentz_example_blows_up_late() {
    // frozen from an independent DOP853 run at rtol = atol = 1e-12
    let run = trace(
        &ex2(),
        &InitialData::laser_pulse(0.3),
        0.6,
        300.0,
        &Tolerances::default(),
    )
    .unwrap();
    assert_eq!(run.record.status, BlowupStatus::BlewUp);
    assert!((run.record.t_star.unwrap() - 99.59810207).abs() < 1e-4);
    let third = trace_third_order(
        &ex2(),
        &InitialData::laser_pulse(0.3),
        0.6,
        300.0,
        &Tolerances::default(),
    )
    .unwrap();
    assert!((third.record.t_star.unwrap() - run.record.t_star.unwrap()).abs() < 1e-6);
}

#[test]
fn constant_closed_form_with_velocity_gradient() {
    let d = InitialData::custom("0.2*sin(x)", "0.3*x*exp(-x^2/2)").unwrap();
    for c in [0.7, 1.0, 2.5] {
        let p = DopingProfile::constant(c).unwrap();
        for x0 in [-1.0, 0.0, 0.4, 2.0] {
            let run = trace(&p, &d, x0, 50.0, &Tolerances::default()).unwrap();
            let s = d.sample(x0);
            for (t, y) in run.trajectory.knots() {
                let q = constant_q_closed_form(c, &s, t);
                assert!((y[3] - q).abs() < 1e-8, "C={c} x0={x0} t={t}");
            }
        }
    }
}

#[test]
fn derived_fields_at_half_period() {
    let p = DopingProfile::constant(1.0).unwrap();
    let d = InitialData::laser_pulse(0.3);
    let run = trace(&p, &d, 0.0, std::f64::consts::PI, &Tolerances::default()).unwrap();
    let pts = derivatives_along(&run, &p, &d).unwrap();
    let last = pts.last().unwrap();
    assert!((last.e + 0.75).abs() < 1e-8, "{}", last.e);
    assert!(last.v.abs() < 1e-8);
}

#[test]
fn derivatives_reject_vanishing_q() {
    let p = DopingProfile::constant(1.0).unwrap();
    let d = InitialData::laser_pulse(0.6);
    let run = trace(&p, &d, 0.0, 10.0, &Tolerances::default()).unwrap();
    assert!(matches!(
        derivatives_along(&run, &p, &d),
        Err(CharacteristicError::QVanished(_))
    ));
}

#[test]
fn reflection_symmetry_for_even_profiles() {
    let d = InitialData::laser_pulse(0.3);
    let tol = Tolerances::default();
    for p in [ex2(), DopingProfile::cosine(0.3, 2.0).unwrap()] {
        for x0 in [0.35, 0.6, 1.0, 1.2] {
            let a = trace(&p, &d, x0, 300.0, &tol).unwrap();
            let b = trace(&p, &d, -x0, 300.0, &tol).unwrap();
            assert_eq!(a.record.status, b.record.status);
            if let (Some(ta), Some(tb)) = (a.record.t_star, b.record.t_star) {
                assert!((ta - tb).abs() < 1e-6, "{x0}: {ta} vs {tb}");
            }
        }
    }
}

#[test]
fn radon_correspondence_matches_riccati() {
    let p = ex2();
    let d = InitialData::laser_pulse(0.3);
    let tol = Tolerances::default();
    for t in [1.0, 5.0, 12.5, 20.0, 40.0] {
        let run = trace(&p, &d, 0.6, t, &tol).unwrap();
        let y = run.trajectory.last_state();
        if y[3] <= 0.1 {
            continue;
        }
        let ric = riccati_trace(&p, &d, 0.6, t, 1e8, &tol).unwrap();
        let v = ric.trajectory.last_state()[3];
        assert!((v - y[4] / y[3]).abs() <= 1e-6 * (1.0 + v.abs()), "t={t}");
    }
}

#[test]
fn radon_pair_satisfies_riccati_system() {
    let p = ex2();
    let d = InitialData::laser_pulse(0.3);
    let run = trace_third_order(&p, &d, 0.6, 60.0, &Tolerances::default()).unwrap();
    for i in 0..run.trajectory.len() {
        let y = run.trajectory.state(i);
        let f = run.trajectory.derivative(i);
        if y[3].abs() <= 0.1 {
            continue;
        }
        let (q, dq, ddq, dddq) = (y[3], y[4], y[5], f[5]);
        let v = dq / q;
        let e = -ddq / q;
        // time derivatives of v = Q'/Q and e = -Q''/Q
        let dv = ddq / q - v * v;
        let de = -dddq / q + ddq * dq / (q * q);
        let c = p.c(y[0]);
        let dc = p.dc(y[0]);
        assert!((dv - (-v * v - e)).abs() < 1e-6);
        assert!((de - (-v * e + c * v + dc * y[1])).abs() < 1e-6);
    }
}

#[test]
fn finite_difference_gradient() {
    let p = ex2();
    let d = InitialData::laser_pulse(0.3);
    let tol = Tolerances::default();
    let h = 1e-4;
    for k in 0..=20 {
        let t = k as f64;
        let run = trace(&p, &d, 0.6, t.max(1e-3), &tol).unwrap();
        let y = run.trajectory.last_state();
        let v = y[4] / y[3];
        let plus = state_at(|t| trace(&p, &d, 0.6 + h, t, &tol).unwrap(), t.max(1e-3));
        let minus = state_at(|t| trace(&p, &d, 0.6 - h, t, &tol).unwrap(), t.max(1e-3));
        let fd = (plus[1] - minus[1]) / (plus[0] - minus[0]);
        assert!((v - fd).abs() <= 1e-3, "t={t}: {v} vs {fd}");
    }
}

#[test]
fn time_reversal_round_trip() {
    let d = InitialData::laser_pulse(0.3);
    let tol = Tolerances::default();
    for p in [ex2(), DopingProfile::cosine(0.3, 2.0).unwrap()] {
        let x0 = 0.6;
        let run = trace(&p, &d, x0, 15.0, &tol).unwrap();
        let r = conserved_rhs(&p, &d.sample(x0));
        let forward = reduced_rhs(&p, r);
        let back = OdeProblem::new(
            |t: f64, y: &[f64], dy: &mut [f64]| {
                forward(t, y, dy);
                dy.iter_mut().for_each(|v| *v = -*v);
            },
            0.0,
            run.trajectory.last_state().to_vec(),
            run.trajectory.t_last(),
        );
        let home = integrate(&back, &tol, &[]).unwrap();
        for (a, b) in home.last_state().iter().zip(run.trajectory.state(0)) {
            assert!((a - b).abs() <= 1e-6);
        }
    }
}

#[test]
fn undamped_limit_matches_third_order() {
    let p = ex2();
    let d = InitialData::laser_pulse(0.3);
    let tol = Tolerances::default();
    let zero = DampingConfig::new(0.0).unwrap();
    for k in 1..=20 {
        let t = k as f64;
        let a = state_at(|t| trace_third_order(&p, &d, 0.6, t, &tol).unwrap(), t);
        let b = state_at(|t| trace_damped(&p, &d, zero, 0.6, t, &tol).unwrap(), t);
        // damped state carries V' = -E in slot 2
        let b_as_third = [b[0], b[1], -b[2], b[3], b[4], b[5]];
        for (u, w) in a.iter().zip(b_as_third) {
            assert!((u - w).abs() < 1e-8, "t={t}");
        }
    }
}

#[test]
fn damped_small_data_stays_smooth() {
    let p = ex2();
    let d = InitialData::laser_pulse(0.3);
    let damp = DampingConfig::new(0.5).unwrap();
    for x0 in [0.0, 0.6, 1.3, 2.0] {
        let run = trace_damped(&p, &d, damp, x0, 500.0, &Tolerances::default()).unwrap();
        assert_eq!(run.record.status, BlowupStatus::SurvivedHorizon);
    }
}

#[test]
fn riccati_escape_examples() {
    let p = DopingProfile::constant(1.0).unwrap();
    let tol = Tolerances::default();
    let t = riccati_oracle(&p, &InitialData::laser_pulse(0.6), 0.0, 50.0, 1e8, &tol).unwrap();
    assert!((t.unwrap() - 2.30052).abs() < 0.01);
    let t = riccati_oracle(&p, &InitialData::laser_pulse(0.3), 0.0, 50.0, 1e8, &tol).unwrap();
    assert_eq!(t, None);
}

#[test]
fn zero_data_residuals_vanish() {
    let d = InitialData::zero();
    let run = trace(&ex2(), &d, 0.8, 100.0, &Tolerances::default()).unwrap();
    let res = invariant_residuals(&run, &ex2(), &d);
    assert!(res.max_e_residual.unwrap() < 1e-15);
    assert!(res.max_q2_residual < 1e-15);
}

#[test]
fn custom_profiles_have_no_field_residual() {
    let p = DopingProfile::from_spec("expr:1+0.3/(1+x^2)").unwrap();
    let d = InitialData::laser_pulse(0.3);
    let run = trace_third_order(&p, &d, 0.6, 30.0, &Tolerances::default()).unwrap();
    let res = invariant_residuals(&run, &p, &d);
    assert!(res.max_e_residual.is_none());
    assert!(res.max_q2_residual < 1e-7);
}

#[test]
fn loose_tolerance_residuals_stay_bounded() {
    let d = InitialData::laser_pulse(0.3);
    let run = trace_third_order(&ex2(), &d, 0.6, 100.0, &Tolerances::uniform(1e-4)).unwrap();
    let res = invariant_residuals(&run, &ex2(), &d);
    assert!(res.max_q2_residual < 1e-2);
    assert!(res.max_e_residual.unwrap() < 1e-2);
}
