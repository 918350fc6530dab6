//! Finite-time blow-up of smooth solutions to the one-dimensional repulsive
//! Euler-Poisson (cold plasma) system with a variable doping profile.
//!
//! Along a characteristic `x(t)` the solution obeys `x' = V`, `V' = -E`,
//! `E' = c(x) V`. The spatial derivatives `(V_x, E_x)` follow a Riccati
//! system which linearises to a scalar function `Q(t)`; the gradients blow
//! up exactly where `Q` first vanishes. This crate traces characteristics
//! together with `Q`, sweeps starting points in parallel, and evaluates the
//! small-oscillation quantities (period shift, instability measure, Floquet
//! multipliers of the Hill equation along a periodic orbit).

pub mod analysis;
pub mod characteristics;
pub mod initial_data;
pub mod integrator;
pub mod profiles;
pub mod sweep;

pub use characteristics::{BlowupRecord, BlowupStatus, CharacteristicRun, DampingConfig};
pub use initial_data::{DataSample, InitialData};
pub use integrator::{Tolerances, Trajectory};
pub use profiles::{DopingProfile, Interval, ProfileExpr, ProfileKind};
pub use sweep::{SweepConfig, SweepReport};

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serialises non-finite floats as `null` and reads `null` back as `NaN`.
pub(crate) mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}
