//! Scenario-file ingestion: a documented JSON schema with degrees at the file
//! boundary and radians internally, plus dotted-path overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::Weights;
use crate::covariance::NoiseModel;
use crate::optimizer::{OptimizerSettings, TransferProblem};
use crate::twobody::{GravityModel, RotationDirection};
use crate::window::WindowSpec;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySpec {
    /// km^3/s^2
    pub mu: f64,
    /// km
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSpec {
    /// km above the surface
    pub altitude: f64,
    #[serde(default = "default_direction")]
    pub direction: RotationDirection,
}

fn default_direction() -> RotationDirection {
    RotationDirection::Ccw
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowFileSpec {
    /// Field-of-view half angle, degrees, in [0, 90].
    pub alpha_deg: f64,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Flags {
    pub forbid_collision: bool,
    pub disable_window: bool,
}

/// Defaults keep the r/theta variances above their in-window fixed points so
/// the window segments actually contract.
fn default_noise() -> NoiseModel {
    NoiseModel { q: [1e-6, 1e-8, 1e-12], r_meas: [1e-2, 1e-6] }
}

fn default_p0() -> [f64; 3] {
    [1.0, 1e-4, 1e-8]
}

fn default_revolutions() -> usize {
    3
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovarianceSpec {
    pub noise: NoiseModel,
    pub p0: [f64; 3],
    /// Window passes covered by the `covariance` command.
    pub revolutions: usize,
}

impl Default for CovarianceSpec {
    fn default() -> Self {
        Self { noise: default_noise(), p0: default_p0(), revolutions: default_revolutions() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub body: BodySpec,
    pub initial_orbit: OrbitSpec,
    pub final_orbit: OrbitSpec,
    pub n_impulses: usize,
    pub window: WindowFileSpec,
    pub weights: Weights,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    #[serde(default)]
    pub flags: Flags,
    #[serde(default)]
    pub covariance: CovarianceSpec,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("invalid override `{0}`: expected key=value with a dotted key")]
    BadOverride(String),
    #[error("override key `{0}` does not match the scenario schema")]
    UnknownOverrideKey(String),
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |field: &'static str, reason: String| ScenarioError::Invalid { field, reason };
        if !(self.body.mu > 0.0) {
            return Err(invalid("body.mu", format!("must be positive, got {}", self.body.mu)));
        }
        if !(self.body.radius > 0.0) {
            return Err(invalid(
                "body.radius",
                format!("must be positive, got {}", self.body.radius),
            ));
        }
        if !(self.initial_orbit.altitude > 0.0) {
            return Err(invalid(
                "initial_orbit.altitude",
                format!("must be positive, got {}", self.initial_orbit.altitude),
            ));
        }
        if !(self.final_orbit.altitude > 0.0) {
            return Err(invalid(
                "final_orbit.altitude",
                format!("must be positive, got {}", self.final_orbit.altitude),
            ));
        }
        if self.n_impulses < 2 {
            return Err(invalid(
                "n_impulses",
                format!("need at least 2, got {}", self.n_impulses),
            ));
        }
        if !(0.0..=90.0).contains(&self.window.alpha_deg) {
            return Err(invalid(
                "window.alpha_deg",
                format!("must be in [0, 90], got {}", self.window.alpha_deg),
            ));
        }
        self.weights.validate().map_err(|e| invalid("weights", e.to_string()))?;
        Ok(())
    }

    pub fn model(&self) -> GravityModel {
        GravityModel::new(self.body.mu, self.body.radius)
    }

    pub fn problem(&self) -> TransferProblem {
        TransferProblem {
            model: self.model(),
            initial_radius: self.body.radius + self.initial_orbit.altitude,
            final_radius: self.body.radius + self.final_orbit.altitude,
            initial_direction: self.initial_orbit.direction,
            final_direction: self.final_orbit.direction,
            n_impulses: self.n_impulses,
            window: (!self.flags.disable_window)
                .then(|| WindowSpec::new(self.window.alpha_deg.to_radians())),
            weights: self.weights,
            forbid_collision: self.flags.forbid_collision,
        }
    }
}

/// Loads, applies key=value overrides, and validates a scenario file.
pub fn load_scenario_with_overrides(
    path: &Path,
    overrides: &[String],
) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    let mut value: serde_json::Value = serde_json::from_str(&text)?;
    for entry in overrides {
        apply_override(&mut value, entry)?;
    }
    let scenario: Scenario = serde_json::from_value(value)?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    load_scenario_with_overrides(path, &[])
}

/// Applies one `dotted.key=value` override to the raw scenario JSON. Values
/// parse as JSON scalars, falling back to a plain string. Missing intermediate
/// objects are created (sections like `optimizer` may be absent from the
/// file); keys that do not exist in the schema are rejected when the patched
/// document is deserialized.
pub fn apply_override(value: &mut serde_json::Value, entry: &str) -> Result<(), ScenarioError> {
    let (key, raw) = entry
        .split_once('=')
        .ok_or_else(|| ScenarioError::BadOverride(entry.to_string()))?;
    if key.is_empty() {
        return Err(ScenarioError::BadOverride(entry.to_string()));
    }
    let new_value: serde_json::Value =
        serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut cursor = value;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        cursor = cursor
            .as_object_mut()
            .ok_or_else(|| ScenarioError::UnknownOverrideKey(key.to_string()))?
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    let leaf = parts[parts.len() - 1];
    let obj = cursor
        .as_object_mut()
        .ok_or_else(|| ScenarioError::UnknownOverrideKey(key.to_string()))?;
    obj.insert(leaf.to_string(), new_value);
    Ok(())
}
