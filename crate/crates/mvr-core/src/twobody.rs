//! Exact two-body propagation via the universal-variable Kepler solver.
//!
//! One code path covers elliptic, parabolic, and hyperbolic motion, which
//! matters because transfer arcs produced by the Lambert solver can be
//! arbitrarily eccentric.

use nalgebra::Vector3;
use thiserror::Error;

/// Kepler iteration tolerance on the time residual, seconds (relative to dt).
const KEPLER_TOL: f64 = 1e-10;
const KEPLER_MAX_ITERS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GravityModel {
    /// Gravitational parameter, km^3/s^2.
    pub mu: f64,
    /// Celestial body radius, km.
    pub body_radius: f64,
}

impl GravityModel {
    pub fn new(mu: f64, body_radius: f64) -> Self {
        assert!(mu > 0.0 && body_radius > 0.0);
        Self { mu, body_radius }
    }

    /// Angular rate of a circular orbit at `radius`, rad/s.
    pub fn circular_rate(&self, radius: f64) -> f64 {
        (self.mu / radius.powi(3)).sqrt()
    }

    /// Period of a circular orbit at `radius`, s.
    pub fn circular_period(&self, radius: f64) -> f64 {
        2.0 * std::f64::consts::PI / self.circular_rate(radius)
    }
}

/// Inertial position/velocity pair at an epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector {
    /// km
    pub position: Vector3<f64>,
    /// km/s
    pub velocity: Vector3<f64>,
    /// s
    pub epoch: f64,
}

impl StateVector {
    pub fn new(position: Vector3<f64>, velocity: Vector3<f64>, epoch: f64) -> Self {
        Self { position, velocity, epoch }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|c| c.is_finite())
            && self.velocity.iter().all(|c| c.is_finite())
            && self.epoch.is_finite()
    }

    /// Specific orbital energy v^2/2 - mu/r, km^2/s^2.
    pub fn specific_energy(&self, model: &GravityModel) -> f64 {
        self.velocity.norm_squared() / 2.0 - model.mu / self.position.norm()
    }

    /// Specific angular momentum r x v, km^2/s.
    pub fn angular_momentum(&self) -> Vector3<f64> {
        self.position.cross(&self.velocity)
    }
}

/// Sense of rotation of a circular orbit in the equatorial plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationDirection {
    Ccw,
    Cw,
}

#[derive(Debug, Error)]
pub enum PropagateError {
    #[error("Kepler iteration did not converge after {0} iterations (degenerate or rectilinear input)")]
    NonConvergence(usize),
    #[error("non-finite input state")]
    NonFiniteInput,
}

/// Stumpff function C(z) = (1 - cos sqrt(z)) / z.
pub(crate) fn stumpff_c(z: f64) -> f64 {
    if z > 1e-8 {
        (1.0 - z.sqrt().cos()) / z
    } else if z < -1e-8 {
        ((-z).sqrt().cosh() - 1.0) / (-z)
    } else {
        // series around zero
        1.0 / 2.0 - z / 24.0 + z * z / 720.0
    }
}

/// Stumpff function S(z) = (sqrt(z) - sin sqrt(z)) / z^(3/2).
pub(crate) fn stumpff_s(z: f64) -> f64 {
    if z > 1e-8 {
        let sz = z.sqrt();
        (sz - sz.sin()) / (z * sz)
    } else if z < -1e-8 {
        let sz = (-z).sqrt();
        (sz.sinh() - sz) / ((-z) * sz)
    } else {
        1.0 / 6.0 - z / 120.0 + z * z / 5040.0
    }
}

/// Propagates a Keplerian state by `dt` seconds.
///
/// Implements the discrete position/velocity maps of the two-body problem
/// through the universal anomaly and Lagrange f/g coefficients.
pub fn propagate(
    state: &StateVector,
    dt: f64,
    model: &GravityModel,
) -> Result<StateVector, PropagateError> {
    if !state.is_finite() || !dt.is_finite() {
        return Err(PropagateError::NonFiniteInput);
    }
    if dt == 0.0 {
        return Ok(*state);
    }

    let mu = model.mu;
    let sqrt_mu = mu.sqrt();
    let r0 = state.position;
    let v0 = state.velocity;
    let r0n = r0.norm();
    let rdotv = r0.dot(&v0);
    // reciprocal semimajor axis
    let alpha = 2.0 / r0n - v0.norm_squared() / mu;

    let mut chi = if alpha > 1e-12 {
        sqrt_mu * dt * alpha
    } else if alpha < -1e-12 {
        // hyperbolic initial guess (Vallado)
        let a = 1.0 / alpha;
        dt.signum()
            * (-a).sqrt()
            * ((-2.0 * mu * alpha * dt)
                / (rdotv + dt.signum() * (-mu * a).sqrt() * (1.0 - r0n * alpha)))
                .abs()
                .ln()
    } else {
        // near-parabolic
        let h = r0.cross(&v0).norm();
        let p = h * h / mu;
        let s = 0.5 * (std::f64::consts::FRAC_PI_2 - (3.0 * (mu / p.powi(3)).sqrt() * dt).atan());
        let w = (s.tan().powf(1.0 / 3.0)).atan();
        p.sqrt() * 2.0 / (2.0 * w).tan()
    };

    let tof = |chi: f64| -> (f64, f64) {
        let z = alpha * chi * chi;
        let c = stumpff_c(z);
        let s = stumpff_s(z);
        let t = (chi.powi(3) * s + rdotv / sqrt_mu * chi * chi * c + r0n * chi * (1.0 - z * s))
            / sqrt_mu;
        let r = chi * chi * c + rdotv / sqrt_mu * chi * (1.0 - z * s) + r0n * (1.0 - z * c);
        (t, r)
    };

    // t(chi) is monotone with t(0) = 0, so one bracket end is free and the
    // other comes from doubling away from the initial guess.
    let (mut lo, mut hi) = if dt > 0.0 { (0.0, chi.max(1e-3)) } else { (chi.min(-1e-3), 0.0) };
    for _ in 0..KEPLER_MAX_ITERS * 4 {
        let probe = if dt > 0.0 { hi } else { lo };
        let (t, _) = tof(probe);
        if (dt > 0.0 && t >= dt) || (dt < 0.0 && t <= dt) {
            break;
        }
        if dt > 0.0 {
            hi *= 2.0;
        } else {
            lo *= 2.0;
        }
    }

    let tol = KEPLER_TOL * dt.abs().max(1.0);
    chi = chi.clamp(lo, hi);
    let mut r = r0n;
    let mut converged = false;
    for _ in 0..KEPLER_MAX_ITERS {
        let (t, rc) = tof(chi);
        r = rc;
        let resid = dt - t;
        if resid.abs() < tol {
            converged = true;
            break;
        }
        if resid > 0.0 {
            lo = chi;
        } else {
            hi = chi;
        }
        let newton = chi + sqrt_mu * resid / r;
        // bisect whenever Newton leaves the bracket (near-parabolic states
        // make the plain update overshoot wildly)
        chi = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    if !converged {
        return Err(PropagateError::NonConvergence(KEPLER_MAX_ITERS));
    }

    let z = alpha * chi * chi;
    let c = stumpff_c(z);
    let s = stumpff_s(z);
    let f = 1.0 - chi * chi * c / r0n;
    let g = dt - chi.powi(3) * s / sqrt_mu;
    let fdot = sqrt_mu / (r * r0n) * chi * (z * s - 1.0);
    let gdot = 1.0 - chi * chi * c / r;

    Ok(StateVector {
        position: f * r0 + g * v0,
        velocity: fdot * r0 + gdot * v0,
        epoch: state.epoch + dt,
    })
}

/// State on a circular equatorial orbit of the given radius at the given
/// inertial angle.
pub fn circular_state(
    radius: f64,
    angle: f64,
    direction: RotationDirection,
    model: &GravityModel,
) -> StateVector {
    assert!(radius > 0.0, "non-positive radius");
    let speed = (model.mu / radius).sqrt();
    let (sin_t, cos_t) = angle.sin_cos();
    let sign = match direction {
        RotationDirection::Ccw => 1.0,
        RotationDirection::Cw => -1.0,
    };
    StateVector {
        position: Vector3::new(radius * cos_t, radius * sin_t, 0.0),
        velocity: Vector3::new(-sign * speed * sin_t, sign * speed * cos_t, 0.0),
        epoch: 0.0,
    }
}
