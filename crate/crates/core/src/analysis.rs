//! Small-oscillation analysis: the constant-profile smoothness criterion,
//! period shift of characteristic orbits, the instability measure `m(x)`,
//! the isochronicity defect and Floquet multipliers of `u'' + c(x(t)) u = 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::characteristics::position_rhs;
use crate::initial_data::{DataSample, InitialData};
use crate::integrator::{
    integrate, Direction, EventSpec, IntegrationFailure, OdeProblem, Tolerances,
};
use crate::profiles::DopingProfile;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("eps = 0 starts on the equilibrium; there is no period to measure")]
    EquilibriumNoPeriod,
    #[error("orbit from x0 = {x0}, eps = {eps} did not return within t = {waited}")]
    NoReturn { x0: f64, eps: f64, waited: f64 },
    #[error("x0 = {0} is a kink of the profile; c' is not defined there")]
    Kink(f64),
    #[error("profile must be positive at x0 = {x0}, got c = {value}")]
    NonPositive { x0: f64, value: f64 },
    #[error("x0 = {0} lies outside the profile domain")]
    OutsideDomain(f64),
    #[error("integration failed: {0}")]
    Integration(Box<IntegrationFailure>),
}

/// Outcome of the smoothness criterion at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionPoint {
    pub x0: f64,
    /// `V0'^2 + 2 E0' - C`
    pub margin: f64,
    pub safe: bool,
}

/// Evaluates `V0'(x)^2 + 2 E0'(x) - C` on `grid`; a point is safe (the
/// solution from it stays smooth for all time) iff the margin is negative.
///
/// # Panics
/// If `c <= 0`.
pub fn constant_criterion(c: f64, data: &InitialData, grid: &[f64]) -> Vec<CriterionPoint> {
    assert!(c > 0.0, "background density must be positive");
    grid.iter()
        .map(|&x0| {
            let s = data.sample(x0);
            let margin = s.dv0 * s.dv0 + 2.0 * s.de0 - c;
            CriterionPoint {
                x0,
                margin,
                safe: margin < 0.0,
            }
        })
        .collect()
}

/// `Q(t)` for a constant profile `C`:
/// `(C - E0')/C + (E0'/C) cos(sqrt(C) t) + (V0'/sqrt(C)) sin(sqrt(C) t)`.
pub fn constant_q_closed_form(c: f64, sample: &DataSample, t: f64) -> f64 {
    assert!(c > 0.0, "background density must be positive");
    let w = c.sqrt();
    (c - sample.de0) / c + sample.de0 / c * (w * t).cos() + sample.dv0 / w * (w * t).sin()
}

fn check_point(profile: &DopingProfile, x0: f64) -> Result<f64, AnalysisError> {
    if !profile.domain().contains(x0) {
        return Err(AnalysisError::OutsideDomain(x0));
    }
    if profile.is_kink(x0) {
        return Err(AnalysisError::Kink(x0));
    }
    let c = profile.c(x0);
    if !(c > 0.0) {
        return Err(AnalysisError::NonPositive { x0, value: c });
    }
    Ok(c)
}

/// `(omega, Omega)` with `omega = sqrt(c)` and
/// `Omega = (5 c'^2 - 3 c c'') / (48 c^3)` at `x0`.
pub fn omega_capital_omega(profile: &DopingProfile, x0: f64) -> Result<(f64, f64), AnalysisError> {
    let c = check_point(profile, x0)?;
    let dc = profile.dc(x0);
    let ddc = profile.ddc(x0);
    Ok((
        c.sqrt(),
        (5.0 * dc * dc - 3.0 * c * ddc) / (48.0 * c * c * c),
    ))
}

/// `m(x)` on a grid together with its interior local maxima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstabilityScan {
    pub x: Vec<f64>,
    /// `NaN` at kink points.
    pub m: Vec<f64>,
    pub maxima: Vec<f64>,
}

/// Evaluates `m(x) = |c'(x) (Omega(x)/omega(x))^3|` and finds local maxima
/// by three-point comparison (`m[i-1] < m[i] >= m[i+1]`).
pub fn instability_measure(profile: &DopingProfile, grid: &[f64]) -> InstabilityScan {
    let m: Vec<f64> = grid
        .iter()
        .map(|&x| match omega_capital_omega(profile, x) {
            Ok((w, big)) => (profile.dc(x) * (big / w).powi(3)).abs(),
            Err(_) => f64::NAN,
        })
        .collect();
    let maxima = (1..m.len().saturating_sub(1))
        .filter(|&i| m[i - 1] < m[i] && m[i] >= m[i + 1])
        .map(|i| grid[i])
        .collect();
    InstabilityScan {
        x: grid.to_vec(),
        m,
        maxima,
    }
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (lm, flm, left) = simpson(f, a, fa, m, fm);
    let (rm, frm, right) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(&f, a, fa, b, fb);
    simpson_rec(&f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// `tau(y) = -y^3 (Cc(y) - c(x0) y)` with `Cc(y) = int_0^y c(x0 + s) ds`.
///
/// Vanishes identically exactly when the centre at `x0` is isochronous.
pub fn isochronicity_defect(profile: &DopingProfile, x0: f64, y: f64) -> f64 {
    let big_c = match (profile.antiderivative(x0 + y), profile.antiderivative(x0)) {
        (Some(fy), Some(f0)) => fy - f0,
        _ => adaptive_simpson(|s| profile.c(x0 + s), 0.0, y, 1e-10),
    };
    -y * y * y * (big_c - profile.c(x0) * y)
}

/// Period of the characteristic orbit with amplitude `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodEstimate {
    pub x0: f64,
    pub eps: f64,
    pub t_measured: f64,
    /// `(2 pi / omega)(1 + Omega eps^2)`
    pub t_asymptotic: f64,
    pub omega: f64,
    pub capital_omega: f64,
}

/// Integrates `x' = V, V' = -E, E' = c(x) V` from `(x0, eps, 0)` and
/// returns the first return time to the section `E = 0` crossed in the
/// starting direction.
pub fn measure_period(
    profile: &DopingProfile,
    x0: f64,
    eps: f64,
    tol: &Tolerances,
) -> Result<PeriodEstimate, AnalysisError> {
    if eps == 0.0 {
        return Err(AnalysisError::EquilibriumNoPeriod);
    }
    let (omega, capital_omega) = omega_capital_omega(profile, x0)?;
    let nominal = 2.0 * std::f64::consts::PI / omega;
    let waited = 10.0 * nominal;
    let problem = OdeProblem::new(position_rhs(profile), 0.0, vec![x0, eps, 0.0], waited);
    // E' = c V has the sign of eps on the section
    let direction = if eps > 0.0 {
        Direction::Increasing
    } else {
        Direction::Decreasing
    };
    let events = [EventSpec::new(|_, y| y[2], direction, true)];
    let traj =
        integrate(&problem, tol, &events).map_err(|f| AnalysisError::Integration(Box::new(f)))?;
    let t_measured = traj
        .events()
        .first()
        .map(|e| e.t)
        .ok_or(AnalysisError::NoReturn { x0, eps, waited })?;
    Ok(PeriodEstimate {
        x0,
        eps,
        t_measured,
        t_asymptotic: nominal * (1.0 + capital_omega * eps * eps),
        omega,
        capital_omega,
    })
}

/// Monodromy of `u'' + c(x(t)) u = 0` along the periodic orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonodromyResult {
    pub x0: f64,
    pub eps: f64,
    pub period: f64,
    /// Row-major `[[u1, u2], [u1', u2']]` at `t = period`.
    pub psi: [[f64; 2]; 2],
    pub multipliers: [Complex64; 2],
    pub max_abs_multiplier: f64,
}

impl MonodromyResult {
    pub fn det(&self) -> f64 {
        self.psi[0][0] * self.psi[1][1] - self.psi[0][1] * self.psi[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.psi[0][0] + self.psi[1][1]
    }
}

/// Eigenvalues of a 2x2 matrix from its trace and determinant.
pub fn multipliers_from(trace: f64, det: f64) -> [Complex64; 2] {
    let disc = Complex64::new(trace * trace - 4.0 * det, 0.0).sqrt();
    let half = Complex64::new(0.5 * trace, 0.0);
    [half + 0.5 * disc, half - 0.5 * disc]
}

/// Fundamental matrix of the Hill equation over one measured period, with
/// `u1(0) = 1, u1'(0) = 0, u2(0) = 0, u2'(0) = 1`.
pub fn monodromy(
    profile: &DopingProfile,
    x0: f64,
    eps: f64,
    tol: &Tolerances,
) -> Result<MonodromyResult, AnalysisError> {
    let period = measure_period(profile, x0, eps, tol)?.t_measured;
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let c = profile.c(y[0]);
        dy[0] = y[1];
        dy[1] = -y[2];
        dy[2] = c * y[1];
        dy[3] = y[4];
        dy[4] = -c * y[3];
        dy[5] = y[6];
        dy[6] = -c * y[5];
    };
    let problem = OdeProblem::new(rhs, 0.0, vec![x0, eps, 0.0, 1.0, 0.0, 0.0, 1.0], period);
    let traj =
        integrate(&problem, tol, &[]).map_err(|f| AnalysisError::Integration(Box::new(f)))?;
    let y = traj.last_state();
    let psi = [[y[3], y[5]], [y[4], y[6]]];
    let trace = psi[0][0] + psi[1][1];
    let det = psi[0][0] * psi[1][1] - psi[0][1] * psi[1][0];
    let multipliers = multipliers_from(trace, det);
    let max_abs_multiplier = multipliers[0].norm().max(multipliers[1].norm());
    Ok(MonodromyResult {
        x0,
        eps,
        period,
        psi,
        multipliers,
        max_abs_multiplier,
    })
}
