//! Doping profiles `c(x) > 0` and their first two derivatives.
//!
//! Builtin profiles carry closed forms for `c`, `c'`, `c''` and an
//! antiderivative. Custom profiles come from an expression and are
//! differentiated symbolically; they have no antiderivative.

mod expr;
mod parse;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use expr::{sgn, Func, Node, ProfileExpr};
pub use parse::{parse, ParseError};

/// Closed interval; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Constant,
    LorentzBump,
    Cosine,
    InverseSquare,
    PowerLaw,
    Custom,
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileKind::Constant => "constant",
            ProfileKind::LorentzBump => "lorentz_bump",
            ProfileKind::Cosine => "cosine",
            ProfileKind::InverseSquare => "inverse_square",
            ProfileKind::PowerLaw => "power_law",
            ProfileKind::Custom => "custom",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid parameters for {kind}: {reason}")]
    InvalidParams { kind: ProfileKind, reason: String },
    #[error("unknown profile `{0}`")]
    UnknownProfile(String),
    #[error(transparent)]
    Positivity(#[from] PositivityViolation),
}

/// First sample where `c(x) > 0` fails (non-finite values count as failures).
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("doping profile is not positive: c({x}) = {value}")]
pub struct PositivityViolation {
    pub x: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Constant {
        c: f64,
    },
    LorentzBump {
        a: f64,
    },
    Cosine {
        a: f64,
        k: f64,
    },
    InverseSquare {
        k: f64,
    },
    PowerLaw {
        c1: f64,
        c2: f64,
    },
    Custom {
        c: ProfileExpr,
        dc: ProfileExpr,
        ddc: ProfileExpr,
    },
}

/// A doping profile with its derivatives. Immutable; `Send + Sync`.
#[derive(Debug, Clone, PartialEq)]
pub struct DopingProfile {
    shape: Shape,
    domain: Interval,
}

impl DopingProfile {
    pub fn constant(c: f64) -> Result<Self, ProfileError> {
        builtin(ProfileKind::Constant, &[c])
    }

    pub fn lorentz_bump(a: f64) -> Result<Self, ProfileError> {
        builtin(ProfileKind::LorentzBump, &[a])
    }

    pub fn cosine(a: f64, k: f64) -> Result<Self, ProfileError> {
        builtin(ProfileKind::Cosine, &[a, k])
    }

    pub fn inverse_square(k: f64) -> Result<Self, ProfileError> {
        builtin(ProfileKind::InverseSquare, &[k])
    }

    pub fn power_law(c1: f64, c2: f64) -> Result<Self, ProfileError> {
        builtin(ProfileKind::PowerLaw, &[c1, c2])
    }

    pub fn kind(&self) -> ProfileKind {
        match self.shape {
            Shape::Constant { .. } => ProfileKind::Constant,
            Shape::LorentzBump { .. } => ProfileKind::LorentzBump,
            Shape::Cosine { .. } => ProfileKind::Cosine,
            Shape::InverseSquare { .. } => ProfileKind::InverseSquare,
            Shape::PowerLaw { .. } => ProfileKind::PowerLaw,
            Shape::Custom { .. } => ProfileKind::Custom,
        }
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    /// The builtin's numeric constant when `c` is constant everywhere.
    pub fn constant_value(&self) -> Option<f64> {
        match &self.shape {
            Shape::Constant { c } => Some(*c),
            Shape::Custom { c, .. } if c.is_constant() => Some(c.eval(0.0)),
            _ => None,
        }
    }

    #[inline]
    pub fn c(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Constant { c } => *c,
            Shape::LorentzBump { a } => 1.0 + a / (1.0 + x * x),
            Shape::Cosine { a, k } => 1.0 + a * (k * x).cos(),
            Shape::InverseSquare { k } => {
                let u = k * x.abs() + 1.0;
                1.0 / (u * u)
            }
            Shape::PowerLaw { c1, c2 } => (c1 * x + c2).powf(-1.5),
            Shape::Custom { c, .. } => c.eval(x),
        }
    }

    #[inline]
    pub fn dc(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Constant { .. } => 0.0,
            Shape::LorentzBump { a } => {
                let d = 1.0 + x * x;
                -2.0 * a * x / (d * d)
            }
            Shape::Cosine { a, k } => -a * k * (k * x).sin(),
            Shape::InverseSquare { k } => {
                let u = k * x.abs() + 1.0;
                -2.0 * k * sgn(x) / (u * u * u)
            }
            Shape::PowerLaw { c1, c2 } => -1.5 * c1 * (c1 * x + c2).powf(-2.5),
            Shape::Custom { dc, .. } => dc.eval(x),
        }
    }

    #[inline]
    pub fn ddc(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Constant { .. } => 0.0,
            Shape::LorentzBump { a } => {
                let d = 1.0 + x * x;
                a * (6.0 * x * x - 2.0) / (d * d * d)
            }
            Shape::Cosine { a, k } => -a * k * k * (k * x).cos(),
            Shape::InverseSquare { k } => {
                let u = k * x.abs() + 1.0;
                6.0 * k * k / (u * u * u * u)
            }
            Shape::PowerLaw { c1, c2 } => 3.75 * c1 * c1 * (c1 * x + c2).powf(-3.5),
            Shape::Custom { ddc, .. } => ddc.eval(x),
        }
    }

    /// An antiderivative `F` with `F' = c`; the additive constant is arbitrary.
    pub fn antiderivative(&self, x: f64) -> Option<f64> {
        Some(match &self.shape {
            Shape::Constant { c } => c * x,
            Shape::LorentzBump { a } => x + a * x.atan(),
            Shape::Cosine { a, k } => x + a / k * (k * x).sin(),
            Shape::InverseSquare { k } => sgn(x) / k * (1.0 - 1.0 / (k * x.abs() + 1.0)),
            Shape::PowerLaw { c1, c2 } => {
                if *c1 == 0.0 {
                    x * c2.powf(-1.5)
                } else {
                    -2.0 * (c1 * x + c2).powf(-0.5) / c1
                }
            }
            Shape::Custom { .. } => return None,
        })
    }

    pub fn has_antiderivative(&self) -> bool {
        !matches!(self.shape, Shape::Custom { .. })
    }

    /// Points where `c'` exists only one-sidedly. There `dc` reports the
    /// `sgn(0) = 0` convention.
    pub fn is_kink(&self, x: f64) -> bool {
        match &self.shape {
            Shape::InverseSquare { .. } => x == 0.0,
            Shape::Custom { c, .. } => c.is_kink(x),
            _ => false,
        }
    }

    /// The expression behind a custom profile.
    pub fn expression(&self) -> Option<&ProfileExpr> {
        match &self.shape {
            Shape::Custom { c, .. } => Some(c),
            _ => None,
        }
    }

    /// Parses the command-line form: `constant:C`, `lorentz:A`,
    /// `cosine:A,K`, `invsq:K`, `powerlaw:C1,C2` or `expr:<expression>`.
    pub fn from_spec(spec: &str) -> Result<Self, ProfileError> {
        let (name, rest) = spec
            .split_once(':')
            .ok_or_else(|| ProfileError::UnknownProfile(spec.to_string()))?;
        let kind = match name.trim() {
            "expr" => {
                let e = ProfileExpr::parse(rest)?;
                return Ok(compile_profile(&e, Interval::REAL_LINE));
            }
            "constant" => ProfileKind::Constant,
            "lorentz" | "lorentz_bump" => ProfileKind::LorentzBump,
            "cosine" => ProfileKind::Cosine,
            "invsq" | "inverse_square" => ProfileKind::InverseSquare,
            "powerlaw" | "power_law" => ProfileKind::PowerLaw,
            other => return Err(ProfileError::UnknownProfile(other.to_string())),
        };
        let params = rest
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| ProfileError::InvalidParams {
                        kind,
                        reason: format!("`{}` is not a number", p.trim()),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        builtin(kind, &params)
    }
}

impl FromStr for DopingProfile {
    type Err = ProfileError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DopingProfile::from_spec(s)
    }
}

/// Builds a closed-form profile. Parameter order follows the kind:
/// `constant [C]`, `lorentz_bump [A]`, `cosine [A, k]`,
/// `inverse_square [K]`, `power_law [C1, C2]`.
pub fn builtin(kind: ProfileKind, params: &[f64]) -> Result<DopingProfile, ProfileError> {
    let invalid = |reason: &str| ProfileError::InvalidParams {
        kind,
        reason: reason.to_string(),
    };
    let want = match kind {
        ProfileKind::Constant | ProfileKind::LorentzBump | ProfileKind::InverseSquare => 1,
        ProfileKind::Cosine | ProfileKind::PowerLaw => 2,
        ProfileKind::Custom => {
            return Err(invalid("custom profiles are built with compile_profile"))
        }
    };
    if params.len() != want {
        return Err(invalid(&format!(
            "expected {want} parameter(s), got {}",
            params.len()
        )));
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(invalid("parameters must be finite"));
    }
    let mut domain = Interval::REAL_LINE;
    let shape = match kind {
        ProfileKind::Constant => {
            let c = params[0];
            if c <= 0.0 {
                return Err(PositivityViolation { x: 0.0, value: c }.into());
            }
            Shape::Constant { c }
        }
        ProfileKind::LorentzBump => {
            let a = params[0];
            // min of 1 + A/(1+x^2) is min(1, 1 + A)
            if a <= -1.0 {
                return Err(PositivityViolation {
                    x: 0.0,
                    value: 1.0 + a,
                }
                .into());
            }
            Shape::LorentzBump { a }
        }
        ProfileKind::Cosine => {
            let (a, k) = (params[0], params[1]);
            if k == 0.0 {
                return Err(invalid("k must be nonzero"));
            }
            if a.abs() >= 1.0 {
                // the minimum 1 - |A| sits where cos(k x) = -sgn(A)
                let x = if a > 0.0 {
                    std::f64::consts::PI / k
                } else {
                    0.0
                };
                return Err(PositivityViolation {
                    x,
                    value: 1.0 - a.abs(),
                }
                .into());
            }
            Shape::Cosine { a, k }
        }
        ProfileKind::InverseSquare => {
            let k = params[0];
            if k <= 0.0 {
                return Err(invalid("K must be positive"));
            }
            Shape::InverseSquare { k }
        }
        ProfileKind::PowerLaw => {
            let (c1, c2) = (params[0], params[1]);
            if c2 <= 0.0 {
                return Err(invalid("C2 must be positive"));
            }
            // the domain is where C1 x + C2 > 0, which contains x = 0
            if c1 > 0.0 {
                domain = Interval::new(-c2 / c1, f64::INFINITY);
            } else if c1 < 0.0 {
                domain = Interval::new(f64::NEG_INFINITY, -c2 / c1);
            }
            Shape::PowerLaw { c1, c2 }
        }
        ProfileKind::Custom => unreachable!(),
    };
    Ok(DopingProfile { shape, domain })
}

/// Bundles an expression with its first and second symbolic derivatives.
pub fn compile_profile(expr: &ProfileExpr, domain: Interval) -> DopingProfile {
    let dc = expr.derivative();
    let ddc = dc.derivative();
    DopingProfile {
        shape: Shape::Custom {
            c: expr.clone(),
            dc,
            ddc,
        },
        domain,
    }
}

/// [`compile_profile`] followed by [`check_positive`] on `check` with
/// `n_samples` points.
pub fn compile_validated(
    expr: &ProfileExpr,
    domain: Interval,
    check: Interval,
    n_samples: usize,
) -> Result<DopingProfile, ProfileError> {
    let profile = compile_profile(expr, domain);
    check_positive(&profile, check, n_samples)?;
    Ok(profile)
}

/// Samples `c` on a uniform grid of `n_samples` points spanning `interval`
/// (endpoints included) and reports the first non-positive value.
pub fn check_positive(
    profile: &DopingProfile,
    interval: Interval,
    n_samples: usize,
) -> Result<(), PositivityViolation> {
    assert!(n_samples >= 2, "check_positive needs at least two samples");
    assert!(
        interval.is_finite(),
        "check_positive needs a finite interval"
    );
    let step = (interval.hi - interval.lo) / (n_samples - 1) as f64;
    for i in 0..n_samples {
        let x = if i + 1 == n_samples {
            interval.hi
        } else {
            interval.lo + i as f64 * step
        };
        let value = profile.c(x);
        if !(value > 0.0) {
            return Err(PositivityViolation { x, value });
        }
    }
    Ok(())
}
