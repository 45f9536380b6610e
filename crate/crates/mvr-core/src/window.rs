//! Observation-window geometry: the admissible impulse-angle interval seen
//! from a surface station with a conical field of view.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::twobody::GravityModel;

/// Station field of view, half-angle about the zenith.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    /// rad, in [0, pi/2]
    pub alpha: f64,
    /// Inertial angle of the window center, rad. Fixed at 0 by convention.
    pub center_angle: f64,
}

impl WindowSpec {
    pub fn new(alpha: f64) -> Self {
        assert!((0.0..=std::f64::consts::FRAC_PI_2).contains(&alpha));
        Self { alpha, center_angle: 0.0 }
    }
}

#[derive(Debug, Error)]
pub enum WindowError {
    #[error("orbit radius {radius} km is at or below the body radius {body_radius} km")]
    BelowSurface { radius: f64, body_radius: f64 },
}

/// Half-width of the admissible angle interval for an orbit at the given
/// altitude above the surface, as seen through a cone of half-angle `alpha`.
pub fn theta_max(alpha: f64, altitude: f64, model: &GravityModel) -> f64 {
    let k = model.body_radius / (model.body_radius + altitude);
    let s2 = alpha.sin().powi(2);
    let arg = k * s2 + alpha.cos() * (1.0 - k * k * s2).sqrt();
    arg.clamp(-1.0, 1.0).acos()
}

/// Angle bounds (theta_min, theta_max) for an orbit radius measured from the
/// body center. The window is symmetric about its center.
pub fn window_bounds(
    radius_from_center: f64,
    spec: &WindowSpec,
    model: &GravityModel,
) -> Result<(f64, f64), WindowError> {
    if radius_from_center <= model.body_radius {
        return Err(WindowError::BelowSurface {
            radius: radius_from_center,
            body_radius: model.body_radius,
        });
    }
    let tmax = theta_max(spec.alpha, radius_from_center - model.body_radius, model);
    Ok((spec.center_angle - tmax, spec.center_angle + tmax))
}
