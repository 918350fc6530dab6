//! Cauchy data `(V0(x), E0(x))` and their first derivatives.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profiles::{ParseError, ProfileExpr};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("velocity expression: {0}")]
    Velocity(ParseError),
    #[error("field expression: {0}")]
    Field(ParseError),
    #[error("unrecognised data spec `{0}` (expected `laser:A` or `expr:V=...;E=...`)")]
    UnknownSpec(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    /// `E0 = a x exp(-x^2/2)`, `V0 = 0`.
    Laser { a: f64 },
    Custom {
        v: ProfileExpr,
        e: ProfileExpr,
        dv: ProfileExpr,
        de: ProfileExpr,
    },
}

/// Initial velocity and electric field with exact derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    repr: Repr,
}

/// All four data values at one starting point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataSample {
    pub x0: f64,
    pub v0: f64,
    pub e0: f64,
    pub dv0: f64,
    pub de0: f64,
}

impl InitialData {
    /// The standard laser pulse excitation with amplitude `a`.
    pub fn laser_pulse(a: f64) -> Self {
        Self {
            repr: Repr::Laser { a },
        }
    }

    pub fn zero() -> Self {
        Self::laser_pulse(0.0)
    }

    /// General data from two expressions in `x`, differentiated symbolically.
    pub fn custom(expr_v: &str, expr_e: &str) -> Result<Self, DataError> {
        let v = ProfileExpr::parse(expr_v).map_err(DataError::Velocity)?;
        let e = ProfileExpr::parse(expr_e).map_err(DataError::Field)?;
        let dv = v.derivative();
        let de = e.derivative();
        Ok(Self {
            repr: Repr::Custom { v, e, dv, de },
        })
    }

    /// Parses `laser:A` or `expr:V=<expr>;E=<expr>`.
    pub fn from_spec(spec: &str) -> Result<Self, DataError> {
        let unknown = || DataError::UnknownSpec(spec.to_string());
        let (name, rest) = spec.split_once(':').ok_or_else(unknown)?;
        match name.trim() {
            "laser" => rest
                .trim()
                .parse::<f64>()
                .map(Self::laser_pulse)
                .map_err(|_| unknown()),
            "expr" => {
                let mut v = None;
                let mut e = None;
                for part in rest.split(';') {
                    let (key, body) = part.split_once('=').ok_or_else(unknown)?;
                    match key.trim() {
                        "V" => v = Some(body),
                        "E" => e = Some(body),
                        _ => return Err(unknown()),
                    }
                }
                Self::custom(v.ok_or_else(unknown)?, e.ok_or_else(unknown)?)
            }
            _ => Err(unknown()),
        }
    }

    pub fn v0(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::Laser { .. } => 0.0,
            Repr::Custom { v, .. } => v.eval(x),
        }
    }

    pub fn e0(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::Laser { a } => a * x * (-0.5 * x * x).exp(),
            Repr::Custom { e, .. } => e.eval(x),
        }
    }

    pub fn dv0(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::Laser { .. } => 0.0,
            Repr::Custom { dv, .. } => dv.eval(x),
        }
    }

    pub fn de0(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::Laser { a } => a * (1.0 - x * x) * (-0.5 * x * x).exp(),
            Repr::Custom { de, .. } => de.eval(x),
        }
    }

    pub fn sample(&self, x0: f64) -> DataSample {
        DataSample {
            x0,
            v0: self.v0(x0),
            e0: self.e0(x0),
            dv0: self.dv0(x0),
            de0: self.de0(x0),
        }
    }

    /// Amplitude of a laser pulse, `None` for custom data.
    pub fn laser_amplitude(&self) -> Option<f64> {
        match self.repr {
            Repr::Laser { a } => Some(a),
            Repr::Custom { .. } => None,
        }
    }
}

impl FromStr for InitialData {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_spec(s)
    }
}
