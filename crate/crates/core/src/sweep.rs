//! Blow-up maps over grids of starting points, the characteristic-crossing
//! oracle, and report persistence.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::characteristics::{
    position_rhs, trace, BlowupRecord, BlowupStatus, CharacteristicError,
};
use crate::fmt17;
use crate::initial_data::InitialData;
use crate::integrator::{integrate, OdeProblem, Tolerances, Trajectory};
use crate::profiles::DopingProfile;

/// Version tag written into JSON reports.
pub const SCHEMA_VERSION: u32 = 1;

/// Outer sampling step of the crossing oracle.
pub const CROSSING_STEP: f64 = 0.01;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(String),
    #[error("grid point {0} appears twice")]
    DuplicateGridPoint(f64),
    #[error("grid must be strictly increasing (at index {0})")]
    UnorderedGrid(usize),
    #[error("grid needs at least two points")]
    GridTooShort,
    #[error("unsupported report schema version {0}")]
    SchemaVersion(u32),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
    pub horizon: f64,
    pub tolerances: Tolerances,
    pub exclude_kinks: bool,
}

impl SweepConfig {
    pub fn new(x_min: f64, x_max: f64, dx: f64, horizon: f64) -> Self {
        Self {
            x_min,
            x_max,
            dx,
            horizon,
            tolerances: Tolerances::default(),
            exclude_kinks: true,
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |m: &str| Err(SweepError::InvalidConfig(m.to_string()));
        if !(self.x_min.is_finite() && self.x_max.is_finite()) {
            return bad("range must be finite");
        }
        if !(self.x_min < self.x_max) {
            return bad("x_min must be below x_max");
        }
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return bad("dx must be positive");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon must be positive");
        }
        if !self.tolerances.is_valid() {
            return bad("tolerances must be positive");
        }
        Ok(())
    }

    /// `x_min + i dx` for `i = 0..=floor((x_max - x_min)/dx)`.
    ///
    /// Halving `dx` reproduces every existing point bit for bit, since
    /// `(2i)(dx/2)` and `i dx` round the same real number.
    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.x_max - self.x_min) / self.dx + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.x_min + i as f64 * self.dx).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalMin {
    pub x0: f64,
    pub t_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub records: Vec<BlowupRecord>,
    pub global_min: Option<GlobalMin>,
}

impl SweepReport {
    /// Builds a report and computes its global minimum (first minimiser on ties).
    pub fn from_records(config: SweepConfig, records: Vec<BlowupRecord>) -> Self {
        let global_min = records
            .iter()
            .filter(|r| r.status == BlowupStatus::BlewUp)
            .filter_map(|r| {
                r.t_star.map(|t| GlobalMin {
                    x0: r.x0,
                    t_star: t,
                })
            })
            .fold(None, |best: Option<GlobalMin>, g| match best {
                Some(b) if b.t_star <= g.t_star => Some(b),
                _ => Some(g),
            });
        Self {
            config,
            records,
            global_min,
        }
    }

    pub fn count(&self, status: BlowupStatus) -> usize {
        self.records.iter().filter(|r| r.status == status).count()
    }
}

fn failed_record(x0: f64, horizon: f64, err: &CharacteristicError) -> BlowupRecord {
    let q_min = match err {
        CharacteristicError::IntegrationFailure { failure, .. } => {
            crate::characteristics::q_min(&failure.partial)
        }
        _ => f64::NAN,
    };
    BlowupRecord {
        x0,
        status: BlowupStatus::Failed,
        t_star: None,
        q_min,
        horizon,
    }
}

/// Traces every grid point independently on the current rayon pool.
/// Records come back in grid order whatever the schedule; failures are
/// recorded rather than propagated.
pub fn blowup_map(
    profile: &DopingProfile,
    data: &InitialData,
    config: &SweepConfig,
) -> Result<SweepReport, SweepError> {
    config.validate()?;
    let grid: Vec<f64> = config
        .grid()
        .into_iter()
        .filter(|&x| !(config.exclude_kinks && profile.is_kink(x)))
        .collect();
    let records: Vec<BlowupRecord> = grid
        .par_iter()
        .map(
            |&x0| match trace(profile, data, x0, config.horizon, &config.tolerances) {
                Ok(run) => run.record,
                Err(e) => failed_record(x0, config.horizon, &e),
            },
        )
        .collect();
    Ok(SweepReport::from_records(*config, records))
}

/// First collision of neighbouring characteristics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub t: f64,
    pub left: f64,
    pub right: f64,
}

fn check_grid(grid: &[f64]) -> Result<(), SweepError> {
    if grid.len() < 2 {
        return Err(SweepError::GridTooShort);
    }
    for (i, w) in grid.windows(2).enumerate() {
        if w[0] == w[1] {
            return Err(SweepError::DuplicateGridPoint(w[0]));
        }
        if !(w[0] < w[1]) {
            return Err(SweepError::UnorderedGrid(i + 1));
        }
    }
    Ok(())
}

fn position_path(
    profile: &DopingProfile,
    data: &InitialData,
    x0: f64,
    horizon: f64,
    tol: &Tolerances,
) -> Trajectory {
    let s = data.sample(x0);
    let problem = OdeProblem::new(position_rhs(profile), 0.0, vec![x0, s.v0, s.e0], horizon);
    match integrate(&problem, tol, &[]) {
        Ok(t) => t,
        Err(f) => f.partial,
    }
}

/// Integrates each characteristic `(x, V, E)` on its own adaptive mesh,
/// samples all of them on the shared outer grid `k * 0.01`, and reports the
/// earliest time a neighbouring pair changes order, refined by bisection on
/// `x_{i+1}(t) - x_i(t)`.
pub fn crossing_oracle(
    profile: &DopingProfile,
    data: &InitialData,
    grid: &[f64],
    horizon: f64,
    tol: &Tolerances,
) -> Result<Option<Crossing>, SweepError> {
    check_grid(grid)?;
    if !(horizon > 0.0) {
        return Err(SweepError::InvalidConfig("horizon must be positive".into()));
    }
    let paths: Vec<Trajectory> = grid
        .par_iter()
        .map(|&x0| position_path(profile, data, x0, horizon, tol))
        .collect();
    let steps = (horizon / CROSSING_STEP).ceil() as usize;
    let per_pair: Vec<Option<Crossing>> = (0..grid.len() - 1)
        .into_par_iter()
        .map(|i| {
            let (a, b) = (&paths[i], &paths[i + 1]);
            let t_valid = a.t_last().min(b.t_last());
            let gap = |t: f64| b.interpolate_component(t, 0) - a.interpolate_component(t, 0);
            let mut prev = 0.0;
            for k in 1..=steps {
                let t = (k as f64 * CROSSING_STEP).min(horizon);
                if t > t_valid {
                    return None;
                }
                if gap(t) <= 0.0 {
                    let t = crate::integrator::refine_root(gap, prev, t).unwrap_or(t);
                    return Some(Crossing {
                        t,
                        left: grid[i],
                        right: grid[i + 1],
                    });
                }
                prev = t;
            }
            None
        })
        .collect();
    Ok(per_pair
        .into_iter()
        .flatten()
        .fold(None, |best: Option<Crossing>, c| match best {
            Some(b) if b.t <= c.t => Some(b),
            _ => Some(c),
        }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

/// CSV with header `x0,status,t_star,q_min`; `t_star` empty unless blown up.
pub fn report_csv(report: &SweepReport) -> String {
    let mut out = String::from("x0,status,t_star,q_min\n");
    for r in &report.records {
        let t = r.t_star.map(fmt17).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt17(r.x0),
            r.status.as_str(),
            t,
            fmt17(r.q_min)
        );
    }
    out
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    schema_version: u32,
    #[serde(flatten)]
    report: T,
}

pub fn report_json(report: &SweepReport) -> Result<String, SweepError> {
    Ok(serde_json::to_string_pretty(&Envelope {
        schema_version: SCHEMA_VERSION,
        report,
    })?)
}

pub fn write_report(
    report: &SweepReport,
    format: ReportFormat,
    path: &Path,
) -> Result<(), SweepError> {
    let body = match format {
        ReportFormat::Csv => report_csv(report),
        ReportFormat::Json => report_json(report)?,
    };
    fs::write(path, body)?;
    Ok(())
}

pub fn parse_report_json(text: &str) -> Result<SweepReport, SweepError> {
    let env: Envelope<SweepReport> = serde_json::from_str(text)?;
    if env.schema_version != SCHEMA_VERSION {
        return Err(SweepError::SchemaVersion(env.schema_version));
    }
    Ok(env.report)
}

pub fn read_report(path: &Path) -> Result<SweepReport, SweepError> {
    parse_report_json(&fs::read_to_string(path)?)
}
