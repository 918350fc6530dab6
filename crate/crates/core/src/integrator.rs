//! Adaptive Runge-Kutta-Fehlberg 4(5) with dense output and event location.
//!
//! The embedded pair is Fehlberg's; the fifth-order solution is propagated
//! and the difference to the fourth-order one drives the step controller.
//! Each accepted step stores endpoint values and derivatives, so the dense
//! output is the cubic Hermite interpolant on that step.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const C: [f64; 6] = [0.0, 0.25, 0.375, 12.0 / 13.0, 1.0, 0.5];
const A: [[f64; 5]; 6] = [
    [0.0; 5],
    [0.25, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 32.0, 9.0 / 32.0, 0.0, 0.0, 0.0],
    [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0, 0.0, 0.0],
    [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0, 0.0],
    [
        -8.0 / 27.0,
        2.0,
        -3544.0 / 2565.0,
        1859.0 / 4104.0,
        -11.0 / 40.0,
    ],
];
const B5: [f64; 6] = [
    16.0 / 135.0,
    0.0,
    6656.0 / 12825.0,
    28561.0 / 56430.0,
    -9.0 / 50.0,
    2.0 / 55.0,
];
const B4: [f64; 6] = [
    25.0 / 216.0,
    0.0,
    1408.0 / 2565.0,
    2197.0 / 4104.0,
    -0.2,
    0.0,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

/// Step-size and error-control settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Accepted steps allowed before giving up.
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

fn default_max_steps() -> usize {
    1_000_000
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            min_step: 1e-14,
            max_step: 0.1,
            max_steps: default_max_steps(),
        }
    }
}

impl Tolerances {
    /// Same absolute and relative tolerance, default step bounds.
    pub fn uniform(tol: f64) -> Self {
        Self {
            abs_tol: tol,
            rel_tol: tol,
            ..Self::default()
        }
    }

    pub fn is_valid(&self) -> bool {
        self.abs_tol > 0.0
            && self.rel_tol > 0.0
            && self.min_step > 0.0
            && self.max_step > 0.0
            && self.min_step < self.max_step
            && self.max_steps > 0
    }
}

/// `y' = rhs(t, y)` on `[t0, t_end]`.
pub struct OdeProblem<F> {
    pub rhs: F,
    pub t0: f64,
    pub y0: Vec<f64>,
    pub t_end: f64,
}

impl<F> OdeProblem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    pub fn new(rhs: F, t0: f64, y0: Vec<f64>, t_end: f64) -> Self {
        Self { rhs, t0, y0, t_end }
    }

    pub fn dimension(&self) -> usize {
        self.y0.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Any,
    Decreasing,
    Increasing,
}

impl Direction {
    fn triggered(self, before: f64, after: f64) -> bool {
        let down = before > 0.0 && after <= 0.0;
        let up = before < 0.0 && after >= 0.0;
        match self {
            Direction::Any => down || up,
            Direction::Decreasing => down,
            Direction::Increasing => up,
        }
    }
}

type Guard<'a> = Box<dyn Fn(f64, &[f64]) -> f64 + Send + Sync + 'a>;

/// A scalar guard whose zero crossings are located during integration.
pub struct EventSpec<'a> {
    guard: Guard<'a>,
    pub direction: Direction,
    pub terminal: bool,
}

impl<'a> EventSpec<'a> {
    pub fn new(
        guard: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'a,
        direction: Direction,
        terminal: bool,
    ) -> Self {
        Self {
            guard: Box::new(guard),
            direction,
            terminal,
        }
    }

    pub fn eval(&self, t: f64, y: &[f64]) -> f64 {
        (self.guard)(t, y)
    }
}

impl fmt::Debug for EventSpec<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EventSpec")
            .field("direction", &self.direction)
            .field("terminal", &self.terminal)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub t: f64,
    pub state: Vec<f64>,
    /// Position of the triggering spec in the `events` slice.
    pub index: usize,
}

/// Cubic Hermite interpolant over one accepted step.
#[derive(Debug, Clone, Copy)]
pub struct HermiteSegment<'a> {
    pub t0: f64,
    pub t1: f64,
    pub y0: &'a [f64],
    pub y1: &'a [f64],
    pub f0: &'a [f64],
    pub f1: &'a [f64],
}

impl HermiteSegment<'_> {
    #[inline]
    fn basis(&self, t: f64) -> [f64; 4] {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        [
            2.0 * s3 - 3.0 * s2 + 1.0,
            (s3 - 2.0 * s2 + s) * h,
            -2.0 * s3 + 3.0 * s2,
            (s3 - s2) * h,
        ]
    }

    pub fn eval_component(&self, t: f64, j: usize) -> f64 {
        if t == self.t0 {
            return self.y0[j];
        }
        if t == self.t1 {
            return self.y1[j];
        }
        let [h00, h10, h01, h11] = self.basis(t);
        h00 * self.y0[j] + h10 * self.f0[j] + h01 * self.y1[j] + h11 * self.f1[j]
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        if t == self.t0 {
            out.copy_from_slice(self.y0);
            return;
        }
        if t == self.t1 {
            out.copy_from_slice(self.y1);
            return;
        }
        let [h00, h10, h01, h11] = self.basis(t);
        for (j, o) in out.iter_mut().enumerate() {
            *o = h00 * self.y0[j] + h10 * self.f0[j] + h01 * self.y1[j] + h11 * self.f1[j];
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.y0.len()];
        self.eval_into(t, &mut out);
        out
    }
}

/// Accepted knots with derivatives, plus located events.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    derivs: Vec<f64>,
    events: Vec<Event>,
}

impl Trajectory {
    fn with_dim(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    fn push(&mut self, t: f64, y: &[f64], f: &[f64]) {
        self.times.push(t);
        self.states.extend_from_slice(y);
        self.derivs.extend_from_slice(f);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn derivative(&self, i: usize) -> &[f64] {
        &self.derivs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn t_last(&self) -> f64 {
        *self.times.last().expect("empty trajectory")
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Knot values of component `j`.
    pub fn component(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().skip(j).step_by(self.dim).copied()
    }

    /// Iterates `(t, state)` over the knots.
    pub fn knots(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.times
            .iter()
            .copied()
            .zip(self.states.chunks_exact(self.dim))
    }

    pub fn segment(&self, i: usize) -> HermiteSegment<'_> {
        HermiteSegment {
            t0: self.times[i],
            t1: self.times[i + 1],
            y0: self.state(i),
            y1: self.state(i + 1),
            f0: self.derivative(i),
            f1: self.derivative(i + 1),
        }
    }

    pub fn segments(&self) -> impl Iterator<Item = HermiteSegment<'_>> + '_ {
        (0..self.len().saturating_sub(1)).map(move |i| self.segment(i))
    }

    fn segment_index(&self, t: f64) -> usize {
        let n = self.len();
        if n < 2 {
            return 0;
        }
        let k = self.times.partition_point(|&s| s <= t);
        k.clamp(1, n - 1) - 1
    }

    /// Dense output at `t`, clamped to the covered time range.
    pub fn interpolate_into(&self, t: f64, out: &mut [f64]) {
        if self.len() == 1 {
            out.copy_from_slice(self.state(0));
            return;
        }
        let t = t.clamp(self.times[0], self.t_last());
        self.segment(self.segment_index(t)).eval_into(t, out);
    }

    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.interpolate_into(t, &mut out);
        out
    }

    pub fn interpolate_component(&self, t: f64, j: usize) -> f64 {
        if self.len() == 1 {
            return self.state(0)[j];
        }
        let t = t.clamp(self.times[0], self.t_last());
        self.segment(self.segment_index(t)).eval_component(t, j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum FailureKind {
    #[error("step size underflow at t = {t} (required step {step:e} below minimum)")]
    StepUnderflow { t: f64, step: f64 },
    #[error("non-finite state encountered at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("step budget of {steps} exhausted at t = {t}")]
    TooManySteps { t: f64, steps: usize },
}

/// Integration stopped early; carries everything accepted before the failure.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind}")]
pub struct IntegrationFailure {
    pub kind: FailureKind,
    pub partial: Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("guard has no sign change on [{lo}, {hi}]")]
pub struct NoSignChange {
    pub lo: f64,
    pub hi: f64,
}

/// Bisection for a zero of `guard` on `[lo, hi]` down to a width of
/// `1e-12 max(1, |t|)`; returns the midpoint of the final bracket.
pub fn refine_root(guard: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64, NoSignChange> {
    let (mut a, mut b) = (lo, hi);
    let ga = guard(a);
    let gb = guard(b);
    if ga == 0.0 {
        return Ok(a);
    }
    if gb == 0.0 {
        return Ok(b);
    }
    if ga.signum() == gb.signum() || ga.is_nan() || gb.is_nan() {
        return Err(NoSignChange { lo, hi });
    }
    let left_sign = ga.signum();
    loop {
        let mid = 0.5 * (a + b);
        if b - a <= 1e-12 * mid.abs().max(1.0) || mid <= a || mid >= b {
            return Ok(mid);
        }
        let g = guard(mid);
        if g == 0.0 {
            return Ok(mid);
        }
        if g.signum() == left_sign {
            a = mid;
        } else {
            b = mid;
        }
    }
}

/// Root of `guard(t, y(t))` on a dense segment.
pub fn refine_on_segment(
    segment: &HermiteSegment<'_>,
    guard: impl Fn(f64, &[f64]) -> f64,
    lo: f64,
    hi: f64,
) -> Result<f64, NoSignChange> {
    let buf = std::cell::RefCell::new(vec![0.0; segment.y0.len()]);
    refine_root(
        |t| {
            let mut y = buf.borrow_mut();
            segment.eval_into(t, &mut y);
            guard(t, &y)
        },
        lo,
        hi,
    )
}

/// Stages `k[1..6]` of a step of size `step` from `(t, y)`; `k[0]` must
/// already hold `f(t, y)`.
fn fill_stages<F>(rhs: &F, t: f64, y: &[f64], step: f64, k: &mut [Vec<f64>], stage: &mut [f64])
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    for s in 1..6 {
        for j in 0..y.len() {
            let mut acc = 0.0;
            for (r, a) in A[s].iter().take(s).enumerate() {
                acc += a * k[r][j];
            }
            stage[j] = y[j] + step * acc;
        }
        rhs(t + C[s] * step, stage, &mut k[s]);
    }
}

/// Fifth-order state at `t_to` reached by a single step from `(t, y)`.
fn substep<F>(rhs: &F, t: f64, y: &[f64], f: &[f64], t_to: f64) -> Vec<f64>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let step = t_to - t;
    if step == 0.0 {
        return y.to_vec();
    }
    let mut k = vec![vec![0.0; n]; 6];
    k[0].copy_from_slice(f);
    let mut stage = vec![0.0; n];
    fill_stages(rhs, t, y, step, &mut k, &mut stage);
    (0..n)
        .map(|j| y[j] + step * (0..6).map(|s| B5[s] * k[s][j]).sum::<f64>())
        .collect()
}

/// Root of the event guard on `[t, t_new]` with states from single
/// sub-steps, so its accuracy matches the integrator rather than the cubic
/// interpolant. Falls back to `guess` if the bracket is lost.
fn polish_event<F>(
    rhs: &F,
    spec: &EventSpec<'_>,
    t: f64,
    y: &[f64],
    f: &[f64],
    t_new: f64,
    guess: f64,
) -> f64
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let g = |s: f64| spec.eval(s, &substep(rhs, t, y, f, s));
    let width = 1e-12 * t_new.abs().max(1.0);
    // shrink the bracket around the interpolant's guess first
    let (mut lo, mut hi) = (t, t_new);
    let mut g_lo = g(lo);
    let g_hi = g(hi);
    if g_lo == 0.0 || g_lo.signum() == g_hi.signum() {
        return guess;
    }
    for probe in [guess - 4.0 * width, guess + 4.0 * width] {
        if probe > lo && probe < hi {
            let gp = g(probe);
            if gp.signum() == g_lo.signum() {
                lo = probe;
                g_lo = gp;
            } else {
                hi = probe;
            }
        }
    }
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if gm.signum() == g_lo.signum() {
            lo = mid;
            g_lo = gm;
        } else {
            hi = mid;
        }
    }
    hi
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Integrates `problem` to `t_end` or to the first terminal event.
pub fn integrate<F>(
    problem: &OdeProblem<F>,
    tol: &Tolerances,
    events: &[EventSpec<'_>],
) -> Result<Trajectory, IntegrationFailure>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    assert!(problem.dimension() >= 1, "empty state vector");
    assert!(problem.t_end > problem.t0, "t_end must exceed t0");
    assert!(tol.is_valid(), "invalid tolerances: {tol:?}");

    let n = problem.dimension();
    let rhs = &problem.rhs;
    let mut traj = Trajectory::with_dim(n);

    let mut t = problem.t0;
    let mut y = problem.y0.clone();
    let mut f = vec![0.0; n];
    rhs(t, &y, &mut f);
    if !all_finite(&y) || !all_finite(&f) {
        return Err(IntegrationFailure {
            kind: FailureKind::NonFiniteState { t },
            partial: traj,
        });
    }
    traj.push(t, &y, &f);

    let mut g_prev: Vec<f64> = events.iter().map(|e| e.eval(t, &y)).collect();
    let mut g_new = vec![0.0; events.len()];

    let mut k = vec![vec![0.0; n]; 6];
    k[0].copy_from_slice(&f);
    let mut stage = vec![0.0; n];
    let mut y5 = vec![0.0; n];
    let mut f_new = vec![0.0; n];

    let mut h = tol.max_step.min(1e-2).min(problem.t_end - t);
    let mut last_nonfinite = false;

    while t < problem.t_end {
        let remaining = problem.t_end - t;
        let step = h.min(remaining);
        if h < tol.min_step || t + step == t {
            let kind = if last_nonfinite {
                FailureKind::NonFiniteState { t }
            } else {
                FailureKind::StepUnderflow { t, step: h }
            };
            return Err(IntegrationFailure {
                kind,
                partial: traj,
            });
        }

        fill_stages(rhs, t, &y, step, &mut k, &mut stage);

        let mut err = 0.0f64;
        let mut finite = true;
        for j in 0..n {
            let mut hi = 0.0;
            let mut lo = 0.0;
            for s in 0..6 {
                hi += B5[s] * k[s][j];
                lo += B4[s] * k[s][j];
            }
            y5[j] = y[j] + step * hi;
            if !y5[j].is_finite() || !hi.is_finite() || !lo.is_finite() {
                finite = false;
                break;
            }
            let scale = tol.abs_tol + tol.rel_tol * y[j].abs().max(y5[j].abs());
            err = err.max((step * (hi - lo)).abs() / scale);
        }
        if finite {
            rhs(t + step, &y5, &mut f_new);
            finite = all_finite(&f_new);
        }
        if !finite {
            last_nonfinite = true;
            h = step * MIN_FACTOR;
            continue;
        }
        last_nonfinite = false;

        if err > 1.0 {
            let factor = (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
            h = step * factor;
            continue;
        }

        let t_new = if step == remaining {
            problem.t_end
        } else {
            t + step
        };

        // events on [t, t_new]
        let mut hits: Vec<(f64, usize)> = Vec::new();
        for (i, spec) in events.iter().enumerate() {
            g_new[i] = spec.eval(t_new, &y5);
            if spec.direction.triggered(g_prev[i], g_new[i]) {
                let seg = HermiteSegment {
                    t0: t,
                    t1: t_new,
                    y0: &y,
                    y1: &y5,
                    f0: &f,
                    f1: &f_new,
                };
                // bracket on the interpolant, then polish against true sub-steps
                let guess =
                    refine_on_segment(&seg, |s, ys| spec.eval(s, ys), t, t_new).unwrap_or(t_new);
                let te = polish_event(rhs, spec, t, &y, &f, t_new, guess);
                hits.push((te, i));
            }
        }
        if !hits.is_empty() {
            hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut stop_at = None;
            for &(te, i) in &hits {
                traj.events.push(Event {
                    t: te,
                    state: substep(rhs, t, &y, &f, te),
                    index: i,
                });
                if events[i].terminal {
                    stop_at = Some(te);
                    break;
                }
            }
            if let Some(te) = stop_at {
                let ye = substep(rhs, t, &y, &f, te);
                if te > t {
                    let mut fe = vec![0.0; n];
                    rhs(te, &ye, &mut fe);
                    traj.push(te, &ye, &fe);
                }
                return Ok(traj);
            }
        }
        g_prev.copy_from_slice(&g_new);

        t = t_new;
        y.copy_from_slice(&y5);
        f.copy_from_slice(&f_new);
        k[0].copy_from_slice(&f);
        traj.push(t, &y, &f);
        if traj.len() > tol.max_steps {
            return Err(IntegrationFailure {
                kind: FailureKind::TooManySteps {
                    t,
                    steps: tol.max_steps,
                },
                partial: traj,
            });
        }

        let factor = if err == 0.0 {
            MAX_FACTOR
        } else {
            (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
        };
        h = (step * factor).min(tol.max_step);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn harmonic(_t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = y[1];
        dy[1] = -y[0];
    }

    fn endpoint_error(tol: f64) -> f64 {
        let p = OdeProblem::new(harmonic, 0.0, vec![1.0, 0.0], 2.0 * PI);
        let tr = integrate(&p, &Tolerances::uniform(tol), &[]).unwrap();
        let y = tr.last_state();
        (y[0] - 1.0).abs().max(y[1].abs())
    }

    #[test]
    fn harmonic_oscillator_closes_its_orbit() {
        let e = endpoint_error(1e-10);
        assert!(e < 1e-8, "endpoint error {e:e}");
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let e6 = endpoint_error(1e-6);
        let e10 = endpoint_error(1e-10);
        assert!(e10 < 1e-2 * e6, "{e10:e} vs {e6:e}");
        let p = OdeProblem::new(harmonic, 0.0, vec![1.0, 0.0], 2.0 * PI);
        let tr = integrate(&p, &Tolerances::uniform(1e-6), &[]).unwrap();
        for (t, y) in tr.knots() {
            assert!((y[0] - t.cos()).abs() < 1e-4);
        }
    }

    #[test]
    fn linear_decay_event() {
        let p = OdeProblem::new(
            |_t: f64, _y: &[f64], dy: &mut [f64]| dy[0] = -1.0,
            0.0,
            vec![1.0],
            5.0,
        );
        let ev = [EventSpec::new(|_, y| y[0], Direction::Decreasing, true)];
        let tr = integrate(&p, &Tolerances::default(), &ev).unwrap();
        assert_eq!(tr.events().len(), 1);
        assert!((tr.events()[0].t - 1.0).abs() < 1e-10);
        assert!((tr.t_last() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn direction_filters_events() {
        let p = OdeProblem::new(harmonic, 0.0, vec![1.0, 0.0], 10.0);
        let ev = [
            EventSpec::new(|_, y| y[0], Direction::Increasing, false),
            EventSpec::new(|_, y| y[0], Direction::Any, false),
        ];
        let tr = integrate(&p, &Tolerances::default(), &ev).unwrap();
        let up: Vec<f64> = tr
            .events()
            .iter()
            .filter(|e| e.index == 0)
            .map(|e| e.t)
            .collect();
        let any: Vec<f64> = tr
            .events()
            .iter()
            .filter(|e| e.index == 1)
            .map(|e| e.t)
            .collect();
        // cos t vanishes at pi/2, 3pi/2, 5pi/2 on [0, 10]; only 3pi/2 is upward
        assert_eq!(up.len(), 1);
        assert_eq!(any.len(), 3);
        assert!((up[0] - 1.5 * PI).abs() < 1e-9);
        assert!((any[0] - 0.5 * PI).abs() < 1e-9);
        assert!((tr.t_last() - 10.0).abs() < 1e-15);
    }

    #[test]
    fn refine_root_simple_brackets() {
        let r = refine_root(|t| t - 1.0, 0.0, 2.0).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let r = refine_root(f64::cos, 1.0, 2.0).unwrap();
        assert!((r - PI / 2.0).abs() < 1e-10);
        assert!(refine_root(|t| t * t + 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn refine_root_on_hermite_segment_of_sine() {
        let (a, b) = (3.0f64, 3.3f64);
        let (y0, y1, f0, f1) = ([a.sin()], [b.sin()], [a.cos()], [b.cos()]);
        let seg = HermiteSegment {
            t0: a,
            t1: b,
            y0: &y0,
            y1: &y1,
            f0: &f0,
            f1: &f1,
        };
        let r = refine_on_segment(&seg, |_, y| y[0], a, b).unwrap();
        // cubic Hermite error: |sin''''| (t-a)^2 (t-b)^2 / 24 at t = pi,
        // with |sin''''| <= sin(3) on [pi, 3.3] ∪ [3, pi], divided by |cos pi| ≈ 1
        let bound = 3.0f64.sin() * (PI - a).powi(2) * (b - PI).powi(2) / 24.0;
        assert!((r - PI).abs() <= bound, "{:e} vs {bound:e}", (r - PI).abs());
        assert!(bound < 3e-6);
    }

    #[test]
    fn dense_output_hits_knots_exactly() {
        let p = OdeProblem::new(harmonic, 0.0, vec![1.0, 0.0], 3.0);
        let tr = integrate(&p, &Tolerances::default(), &[]).unwrap();
        for i in 0..tr.len() {
            assert_eq!(tr.interpolate(tr.times()[i]), tr.state(i));
        }
        assert!(tr.times().windows(2).all(|w| w[0] < w[1]));
        // cubic Hermite error bound h^4/384 max|y''''|, plus the step error
        let h = tr.times()[4] - tr.times()[3];
        let mid = tr.times()[3] + 0.5 * h;
        let bound = h.powi(4) / 384.0 + 1e-9;
        assert!((tr.interpolate_component(mid, 0) - mid.cos()).abs() < bound);
    }

    #[test]
    fn nonfinite_blowup_is_reported() {
        // y' = y^2, y(0) = 1 explodes at t = 1
        let p = OdeProblem::new(
            |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0],
            0.0,
            vec![1.0],
            2.0,
        );
        let err = integrate(&p, &Tolerances::default(), &[]).unwrap_err();
        assert!(err.partial.t_last() < 1.0);
        assert!(err.partial.t_last() > 0.999);
    }

    #[test]
    fn event_rerun_reproduces_state() {
        let p = OdeProblem::new(harmonic, 0.0, vec![1.0, 0.3], 20.0);
        let ev = [EventSpec::new(
            |_, y| y[0] + 0.5,
            Direction::Decreasing,
            true,
        )];
        let tr = integrate(&p, &Tolerances::default(), &ev).unwrap();
        let e = &tr.events()[0];
        let p2 = OdeProblem::new(harmonic, 0.0, vec![1.0, 0.3], e.t);
        let tr2 = integrate(&p2, &Tolerances::default(), &[]).unwrap();
        for (a, b) in tr2.last_state().iter().zip(&e.state) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!((e.state[0] + 0.5).abs() < 1e-11);
    }

    #[test]
    fn step_budget_is_enforced() {
        let tol = Tolerances {
            max_steps: 10,
            ..Tolerances::default()
        };
        let err = integrate(
            &OdeProblem::new(harmonic, 0.0, vec![1.0, 0.0], 100.0),
            &tol,
            &[],
        )
        .unwrap_err();
        assert!(
            matches!(err.kind, FailureKind::TooManySteps { steps: 10, .. }),
            "{err:?}"
        );
        assert_eq!(err.partial.len(), 11);
    }
}
