//! Characteristics with the blow-up tracer `Q(t)`.
//!
//! Three formulations are available:
//!
//! * reduced (primary): `(x, V, E, Q, Q')` with `Q'' = R - c(x) Q`, where
//!   `R = c(x0) - E0'(x0)` is conserved;
//! * third order: `(x, V, E, Q, Q', Q'')` with
//!   `Q''' = -c(x) Q' - c'(x) V Q`;
//! * damped: `(x, V, V', Q, Q', Q'')` for friction coefficient `q`.
//!
//! Gradients `v = V_x`, `e = E_x` are recovered as `v = Q'/Q` and
//! `e = -Q''/Q` (damped: `e = -(Q'' + q Q')/Q`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::initial_data::{DataSample, InitialData};
use crate::integrator::{
    integrate, refine_on_segment, Direction, EventSpec, IntegrationFailure, OdeProblem, Tolerances,
    Trajectory,
};
use crate::profiles::DopingProfile;

/// State index of `Q` in every formulation.
pub const Q_INDEX: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Formulation {
    Reduced,
    ThirdOrder,
    Damped { q: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowupStatus {
    #[serde(rename = "blewup")]
    BlewUp,
    #[serde(rename = "survived")]
    SurvivedHorizon,
    Equilibrium,
    Failed,
}

impl BlowupStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            BlowupStatus::BlewUp => "blewup",
            BlowupStatus::SurvivedHorizon => "survived",
            BlowupStatus::Equilibrium => "equilibrium",
            BlowupStatus::Failed => "failed",
        }
    }
}

/// Outcome for one starting point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupRecord {
    pub x0: f64,
    pub status: BlowupStatus,
    /// First zero of `Q`; present iff `status == BlewUp`.
    pub t_star: Option<f64>,
    #[serde(with = "crate::nan_as_null")]
    pub q_min: f64,
    pub horizon: f64,
}

/// `(x, V, E, Q, Q')` at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentedState {
    pub x: f64,
    pub velocity: f64,
    pub field: f64,
    pub q: f64,
    pub dq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingConfig {
    q: f64,
}

impl DampingConfig {
    pub fn new(q: f64) -> Result<Self, CharacteristicError> {
        if q >= 0.0 && q.is_finite() {
            Ok(Self { q })
        } else {
            Err(CharacteristicError::NegativeDamping(q))
        }
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CharacteristicError {
    #[error("characteristic from x0 = {x0}: {failure}")]
    IntegrationFailure {
        x0: f64,
        failure: Box<IntegrationFailure>,
    },
    #[error("starting point {0} lies outside the profile domain")]
    OutsideDomain(f64),
    #[error("horizon must be positive, got {0}")]
    InvalidHorizon(f64),
    #[error("damping coefficient must be non-negative, got {0}")]
    NegativeDamping(f64),
    #[error("Q vanished at t = {0}")]
    QVanished(f64),
}

/// A traced characteristic.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicRun {
    pub formulation: Formulation,
    pub trajectory: Trajectory,
    pub record: BlowupRecord,
}

impl CharacteristicRun {
    pub fn x0(&self) -> f64 {
        self.record.x0
    }

    /// Knot `i` in the common `(x, V, E, Q, Q')` view.
    pub fn augmented(&self, i: usize) -> AugmentedState {
        let y = self.trajectory.state(i);
        let field = match self.formulation {
            Formulation::Damped { q } => -y[2] - q * y[1],
            _ => y[2],
        };
        AugmentedState {
            x: y[0],
            velocity: y[1],
            field,
            q: y[3],
            dq: y[4],
        }
    }

    /// `Q''` at knot `i`.
    fn q_second(&self, i: usize, profile: &DopingProfile, r: f64) -> f64 {
        let y = self.trajectory.state(i);
        match self.formulation {
            Formulation::Reduced => r - profile.c(y[0]) * y[3],
            Formulation::ThirdOrder | Formulation::Damped { .. } => y[5],
        }
    }
}

/// Conserved right-hand side `c(x0) - E0'(x0)`.
pub fn conserved_rhs(profile: &DopingProfile, sample: &DataSample) -> f64 {
    profile.c(sample.x0) - sample.de0
}

/// Vector field of the reduced formulation.
pub fn reduced_rhs(profile: &DopingProfile, r: f64) -> impl Fn(f64, &[f64], &mut [f64]) + '_ {
    move |_t, y, dy| {
        let c = profile.c(y[0]);
        dy[0] = y[1];
        dy[1] = -y[2];
        dy[2] = c * y[1];
        dy[3] = y[4];
        dy[4] = r - c * y[3];
    }
}

/// Vector field of the third-order formulation.
pub fn third_order_rhs(profile: &DopingProfile) -> impl Fn(f64, &[f64], &mut [f64]) + '_ {
    move |_t, y, dy| {
        let c = profile.c(y[0]);
        let dc = profile.dc(y[0]);
        dy[0] = y[1];
        dy[1] = -y[2];
        dy[2] = c * y[1];
        dy[3] = y[4];
        dy[4] = y[5];
        dy[5] = -c * y[4] - dc * y[1] * y[3];
    }
}

/// Vector field of the damped formulation.
pub fn damped_rhs(profile: &DopingProfile, q: f64) -> impl Fn(f64, &[f64], &mut [f64]) + '_ {
    move |_t, y, dy| {
        let c = profile.c(y[0]);
        let dc = profile.dc(y[0]);
        dy[0] = y[1];
        dy[1] = y[2];
        dy[2] = -q * y[2] - c * y[1];
        dy[3] = y[4];
        dy[4] = y[5];
        dy[5] = -q * y[5] - c * y[4] - dc * y[1] * y[3];
    }
}

/// Positions only: `(x, V, E)`.
pub fn position_rhs(profile: &DopingProfile) -> impl Fn(f64, &[f64], &mut [f64]) + '_ {
    move |_t, y, dy| {
        dy[0] = y[1];
        dy[1] = -y[2];
        dy[2] = profile.c(y[0]) * y[1];
    }
}

fn check_inputs(profile: &DopingProfile, x0: f64, horizon: f64) -> Result<(), CharacteristicError> {
    if !profile.domain().contains(x0) || !x0.is_finite() {
        return Err(CharacteristicError::OutsideDomain(x0));
    }
    if !(horizon > 0.0) {
        return Err(CharacteristicError::InvalidHorizon(horizon));
    }
    Ok(())
}

fn run_with_q_event<F>(
    formulation: Formulation,
    rhs: F,
    y0: Vec<f64>,
    x0: f64,
    horizon: f64,
    tol: &Tolerances,
) -> Result<CharacteristicRun, CharacteristicError>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let problem = OdeProblem::new(rhs, 0.0, y0, horizon);
    let events = [EventSpec::new(
        |_, y| y[Q_INDEX],
        Direction::Decreasing,
        true,
    )];
    let trajectory = integrate(&problem, tol, &events).map_err(|failure| {
        CharacteristicError::IntegrationFailure {
            x0,
            failure: Box::new(failure),
        }
    })?;
    let t_star = trajectory.events().first().map(|e| e.t);
    let record = BlowupRecord {
        x0,
        status: if t_star.is_some() {
            BlowupStatus::BlewUp
        } else {
            BlowupStatus::SurvivedHorizon
        },
        t_star,
        q_min: q_min(&trajectory),
        horizon,
    };
    Ok(CharacteristicRun {
        formulation,
        trajectory,
        record,
    })
}

/// Minimum of `Q` over a (possibly partial) run: knots, plus interior
/// minima located as upward zeros of `Q'` on the dense output.
pub fn q_min(trajectory: &Trajectory) -> f64 {
    let knots = trajectory.component(Q_INDEX).fold(f64::INFINITY, f64::min);
    trajectory
        .segments()
        .filter(|seg| seg.y0[Q_INDEX + 1] < 0.0 && seg.y1[Q_INDEX + 1] > 0.0)
        .filter_map(|seg| {
            refine_on_segment(&seg, |_, y| y[Q_INDEX + 1], seg.t0, seg.t1)
                .ok()
                .map(|t| seg.eval_component(t, Q_INDEX))
        })
        .fold(knots, f64::min)
}

/// Minimum over `t` of the frozen-coefficient closed form for `Q`.
fn frozen_q_minimum(c: f64, sample: &DataSample) -> f64 {
    let mean = (c - sample.de0) / c;
    let amplitude = ((sample.de0 / c).powi(2) + sample.dv0 * sample.dv0 / c).sqrt();
    mean - amplitude
}

/// Traces the characteristic from `x0` with the reduced formulation and a
/// terminal event at the first zero of `Q`.
///
/// A starting point at rest (`V0 = E0 = 0`) stays at `x0`, so `c` is frozen
/// at `c(x0)` and `Q` is known in closed form. When that closed form stays
/// positive and the derivative data are not both zero, the record is
/// classified [`BlowupStatus::Equilibrium`].
pub fn trace(
    profile: &DopingProfile,
    data: &InitialData,
    x0: f64,
    horizon: f64,
    tol: &Tolerances,
) -> Result<CharacteristicRun, CharacteristicError> {
    check_inputs(profile, x0, horizon)?;
    let s = data.sample(x0);
    let r = conserved_rhs(profile, &s);
    let y0 = vec![x0, s.v0, s.e0, 1.0, s.dv0];
    let mut run = run_with_q_event(
        Formulation::Reduced,
        reduced_rhs(profile, r),
        y0,
        x0,
        horizon,
        tol,
    )?;
    let at_rest = s.v0 == 0.0 && s.e0 == 0.0;
    let trivial = s.dv0 == 0.0 && s.de0 == 0.0;
    if at_rest
        && !trivial
        && run.record.status == BlowupStatus::SurvivedHorizon
        && frozen_q_minimum(profile.c(x0), &s) > 0.0
    {
        run.record.status = BlowupStatus::Equilibrium;
    }
    Ok(run)
}

/// Cross-check formulation integrating the third-order equation for `Q`.
pub fn trace_third_order(
    profile: &DopingProfile,
    data: &InitialData,
    x0: f64,
    horizon: f64,
    tol: &Tolerances,
) -> Result<CharacteristicRun, CharacteristicError> {
    check_inputs(profile, x0, horizon)?;
    let s = data.sample(x0);
    let y0 = vec![x0, s.v0, s.e0, 1.0, s.dv0, -s.de0];
    run_with_q_event(
        Formulation::ThirdOrder,
        third_order_rhs(profile),
        y0,
        x0,
        horizon,
        tol,
    )
}

/// Characteristic of the damped system with friction `q`.
///
/// Initial conditions: `V'(0) = -E0 - q V0` and `Q''(0) = -E0' - q V0'`;
/// the latter follows from `p2 = -(Q'' + q Q')` in the linearised system
/// and reduces to `-E0'` when `q = 0` or `V0' = 0`.
pub fn trace_damped(
    profile: &DopingProfile,
    data: &InitialData,
    damping: DampingConfig,
    x0: f64,
    horizon: f64,
    tol: &Tolerances,
) -> Result<CharacteristicRun, CharacteristicError> {
    check_inputs(profile, x0, horizon)?;
    let q = damping.q();
    let s = data.sample(x0);
    let y0 = vec![x0, s.v0, -s.e0 - q * s.v0, 1.0, s.dv0, -s.de0 - q * s.dv0];
    run_with_q_event(
        Formulation::Damped { q },
        damped_rhs(profile, q),
        y0,
        x0,
        horizon,
        tol,
    )
}

/// Direct integration of the nonlinear gradient system.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiRun {
    /// Knots of `(x, V, E, v, e)`.
    pub trajectory: Trajectory,
    /// First time `|v| + |e|` reaches the cap, or the last valid time when
    /// the integrator gave up near the singularity.
    pub escape: Option<f64>,
    pub underflow: bool,
}

/// Integrates `v' = -v^2 - e`, `e' = -v e + c(x) v + c'(x) V` along the
/// characteristic, independently of `Q`.
pub fn riccati_trace(
    profile: &DopingProfile,
    data: &InitialData,
    x0: f64,
    horizon: f64,
    cap: f64,
    tol: &Tolerances,
) -> Result<RiccatiRun, CharacteristicError> {
    check_inputs(profile, x0, horizon)?;
    assert!(cap > 0.0, "escape cap must be positive");
    let s = data.sample(x0);
    let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        let c = profile.c(y[0]);
        let dc = profile.dc(y[0]);
        dy[0] = y[1];
        dy[1] = -y[2];
        dy[2] = c * y[1];
        dy[3] = -y[3] * y[3] - y[4];
        dy[4] = -y[3] * y[4] + c * y[3] + dc * y[1];
    };
    let problem = OdeProblem::new(rhs, 0.0, vec![x0, s.v0, s.e0, s.dv0, s.de0], horizon);
    let events = [EventSpec::new(
        move |_, y| y[3].abs() + y[4].abs() - cap,
        Direction::Increasing,
        true,
    )];
    match integrate(&problem, tol, &events) {
        Ok(trajectory) => {
            let escape = trajectory.events().first().map(|e| e.t);
            Ok(RiccatiRun {
                trajectory,
                escape,
                underflow: false,
            })
        }
        Err(failure) => {
            let t = failure.partial.t_last();
            Ok(RiccatiRun {
                trajectory: failure.partial,
                escape: Some(t),
                underflow: true,
            })
        }
    }
}

/// Escape time of the Riccati system, `None` if bounded through `horizon`.
pub fn riccati_oracle(
    profile: &DopingProfile,
    data: &InitialData,
    x0: f64,
    horizon: f64,
    cap: f64,
    tol: &Tolerances,
) -> Result<Option<f64>, CharacteristicError> {
    Ok(riccati_trace(profile, data, x0, horizon, cap, tol)?.escape)
}

/// Gradients and density at one knot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedPoint {
    pub t: f64,
    /// `V_x`
    pub v: f64,
    /// `E_x`
    pub e: f64,
    /// Electron density `c(x) - E_x`.
    pub n: f64,
}

/// `(v, e, n)` at knot `i`, or `None` where `|Q| < 1e-12`.
pub fn derived_at(
    run: &CharacteristicRun,
    profile: &DopingProfile,
    r: f64,
    i: usize,
) -> Option<DerivedPoint> {
    let t = run.trajectory.times()[i];
    let y = run.trajectory.state(i);
    let (q, dq) = (y[3], y[4]);
    if q.abs() < 1e-12 {
        return None;
    }
    let ddq = run.q_second(i, profile, r);
    let e = match run.formulation {
        Formulation::Damped { q: damp } => -(ddq + damp * dq) / q,
        _ => -ddq / q,
    };
    Some(DerivedPoint {
        t,
        v: dq / q,
        e,
        n: profile.c(y[0]) - e,
    })
}

/// Evaluates `(v, e, n)` on every knot of the run.
pub fn derivatives_along(
    run: &CharacteristicRun,
    profile: &DopingProfile,
    data: &InitialData,
) -> Result<Vec<DerivedPoint>, CharacteristicError> {
    let r = conserved_rhs(profile, &data.sample(run.x0()));
    (0..run.trajectory.len())
        .map(|i| {
            derived_at(run, profile, r, i)
                .ok_or(CharacteristicError::QVanished(run.trajectory.times()[i]))
        })
        .collect()
}

/// Largest deviations from the two first integrals along a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantResiduals {
    /// `E(t) - (F(x(t)) - F(x0) + E0(x0))`; `None` without an antiderivative.
    pub max_e_residual: Option<f64>,
    /// `Q'' + c(x) Q - (c(x0) - E0'(x0))` (damped: `Q'' + q Q' + c Q - ...`).
    pub max_q2_residual: f64,
}

pub fn invariant_residuals(
    run: &CharacteristicRun,
    profile: &DopingProfile,
    data: &InitialData,
) -> InvariantResiduals {
    let s = data.sample(run.x0());
    let r = conserved_rhs(profile, &s);
    let traj = &run.trajectory;
    let damp = match run.formulation {
        Formulation::Damped { q } => q,
        _ => 0.0,
    };

    let mut q2 = 0.0f64;
    for i in 0..traj.len() {
        let y = traj.state(i);
        let ddq = match run.formulation {
            // the reduced system stores Q'' only through its vector field
            Formulation::Reduced => traj.derivative(i)[4],
            _ => y[5],
        };
        q2 = q2.max((ddq + damp * y[4] + profile.c(y[0]) * y[3] - r).abs());
    }

    let max_e_residual = profile.antiderivative(s.x0).map(|f0| {
        (0..traj.len())
            .map(|i| {
                let a = run.augmented(i);
                let f = profile.antiderivative(a.x).unwrap_or(f64::NAN);
                (a.field - (f - f0 + s.e0)).abs()
            })
            .fold(0.0f64, f64::max)
    });

    InvariantResiduals {
        max_e_residual,
        max_q2_residual: q2,
    }
}

/// Times and magnitudes of the local extrema of `V` (zeros of `V'`).
pub fn velocity_peaks(run: &CharacteristicRun) -> Vec<(f64, f64)> {
    // index 2 holds E (V' = -E) or, damped, V' itself
    let traj = &run.trajectory;
    let mut peaks = Vec::new();
    for seg in traj.segments() {
        let (a, b) = (seg.y0[2], seg.y1[2]);
        if a == 0.0 || a.signum() == b.signum() && b != 0.0 {
            continue;
        }
        if let Ok(t) = refine_on_segment(&seg, |_, y| y[2], seg.t0, seg.t1) {
            peaks.push((t, seg.eval_component(t, 1).abs()));
        }
    }
    peaks
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed_form_root_a06() -> f64 {
        // 1 - 1.2 sin^2(t/2) = 0
        2.0 * (1.0f64 / 1.2).sqrt().asin()
    }

    #[test]
    fn constant_profile_strong_pulse_blows_up() {
        let p = DopingProfile::constant(1.0).unwrap();
        let d = InitialData::laser_pulse(0.6);
        let run = trace(&p, &d, 0.0, 300.0, &Tolerances::default()).unwrap();
        assert_eq!(run.record.status, BlowupStatus::BlewUp);
        let t = run.record.t_star.unwrap();
        assert!((t - closed_form_root_a06()).abs() < 1e-8, "{t}");
        assert!((t - 2.30052).abs() < 1e-5);
        assert!(run.record.q_min.abs() < 1e-9);
    }

    #[test]
    fn zero_data_keeps_q_at_one() {
        let p = DopingProfile::lorentz_bump(0.3).unwrap();
        let d = InitialData::zero();
        let run = trace(&p, &d, 0.7, 50.0, &Tolerances::default()).unwrap();
        assert_eq!(run.record.status, BlowupStatus::SurvivedHorizon);
        assert!(run.trajectory.component(Q_INDEX).all(|q| q == 1.0));
        assert_eq!(run.record.q_min, 1.0);
    }

    #[test]
    fn third_order_matches_reduced() {
        let p = DopingProfile::constant(1.0).unwrap();
        let d = InitialData::laser_pulse(0.6);
        let tol = Tolerances::default();
        let a = trace(&p, &d, 0.0, 300.0, &tol).unwrap();
        let b = trace_third_order(&p, &d, 0.0, 300.0, &tol).unwrap();
        assert!((a.record.t_star.unwrap() - b.record.t_star.unwrap()).abs() < 1e-6);
    }

    #[test]
    fn third_order_constant_survives_with_known_minimum() {
        let p = DopingProfile::constant(1.0).unwrap();
        let d = InitialData::laser_pulse(0.3);
        let run = trace_third_order(&p, &d, 0.0, 50.0, &Tolerances::default()).unwrap();
        assert_eq!(run.record.status, BlowupStatus::SurvivedHorizon);
        assert!((run.record.q_min - 0.4).abs() < 1e-6);
        // the primary tracer classifies this rest point as an equilibrium
        let run = trace(&p, &d, 0.0, 50.0, &Tolerances::default()).unwrap();
        assert_eq!(run.record.status, BlowupStatus::Equilibrium);
    }

    #[test]
    fn damped_zero_data_is_static() {
        let p = DopingProfile::lorentz_bump(0.3).unwrap();
        let run = trace_damped(
            &p,
            &InitialData::zero(),
            DampingConfig::new(0.5).unwrap(),
            0.4,
            30.0,
            &Tolerances::default(),
        )
        .unwrap();
        assert!(run
            .trajectory
            .knots()
            .all(|(_, y)| y[0] == 0.4 && y[3] == 1.0));
    }

    #[test]
    fn negative_damping_rejected() {
        assert!(DampingConfig::new(-0.1).is_err());
    }

    #[test]
    fn derived_fields_at_start() {
        let p = DopingProfile::lorentz_bump(0.3).unwrap();
        let d = InitialData::custom("0.1*sin(x)", "0.3*x*exp(-x^2/2)").unwrap();
        let run = trace(&p, &d, 0.6, 5.0, &Tolerances::default()).unwrap();
        let pts = derivatives_along(&run, &p, &d).unwrap();
        let s = d.sample(0.6);
        assert!((pts[0].v - s.dv0).abs() < 1e-15);
        assert!((pts[0].e - s.de0).abs() < 1e-15);
        assert!((pts[0].n - (p.c(0.6) - s.de0)).abs() < 1e-15);
    }

    #[test]
    fn outside_domain_and_bad_horizon() {
        let p = DopingProfile::power_law(1.0, 2.0).unwrap();
        let d = InitialData::laser_pulse(0.3);
        let tol = Tolerances::default();
        assert!(matches!(
            trace(&p, &d, -3.0, 10.0, &tol),
            Err(CharacteristicError::OutsideDomain(_))
        ));
        assert!(matches!(
            trace(&p, &d, 0.0, 0.0, &tol),
            Err(CharacteristicError::InvalidHorizon(_))
        ));
    }
}
