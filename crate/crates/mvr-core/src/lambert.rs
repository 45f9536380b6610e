//! Single-revolution Lambert solver (universal-variable bisection) and the
//! reflection trick that extends it to transfer angles beyond pi.
//!
//! The boundary-value solver sweeps the short way only; `solve_directed`
//! decides from the pre-impulse velocity whether the coast motion agrees with
//! the short-way direction and, when it does not, negates the boundary
//! velocity, solves, and negates the outputs. The resulting impulse magnitude
//! is unchanged and the flown arc is the long-way branch of the same conic.

use nalgebra::Vector3;
use thiserror::Error;

use crate::twobody::{stumpff_c, stumpff_s, GravityModel};

/// Transfer-angle singularity guard, rad.
const ANGLE_GUARD: f64 = 1e-6;
/// Time-residual tolerance for the bisection, s.
const TIME_TOL: f64 = 1e-8;
const MAX_ITERS: usize = 200;

#[derive(Debug, Clone, Copy)]
pub struct LambertSolution {
    /// Required velocity at r1, km/s.
    pub departure_velocity: Vector3<f64>,
    /// Velocity on arrival at r2, km/s.
    pub arrival_velocity: Vector3<f64>,
    /// Swept angle of the arc, rad, in (0, 2*pi).
    pub transfer_angle: f64,
}

#[derive(Debug, Error)]
pub enum LambertError {
    #[error("transfer angle {0} rad is within tolerance of 0 or pi; transfer plane undefined")]
    SingularGeometry(f64),
    #[error("bisection did not converge after {0} iterations")]
    NonConvergence(usize),
    #[error("transfer time {dt} s is not attainable for this geometry")]
    UnreachableTime { dt: f64 },
    #[error("transfer time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("long-way arc requires an elliptic conic; solution is not bound")]
    NonEllipticLongWay,
}

/// Solves the boundary-value problem for the arc sweeping less than pi
/// from `r1` to `r2` in time `dt`.
pub fn solve_short_way(
    r1: &Vector3<f64>,
    r2: &Vector3<f64>,
    dt: f64,
    model: &GravityModel,
) -> Result<LambertSolution, LambertError> {
    if dt <= 0.0 {
        return Err(LambertError::NonPositiveTime(dt));
    }
    let r1n = r1.norm();
    let r2n = r2.norm();
    let cos_dnu = (r1.dot(r2) / (r1n * r2n)).clamp(-1.0, 1.0);
    let dnu = cos_dnu.acos(); // in [0, pi]
    if dnu < ANGLE_GUARD || std::f64::consts::PI - dnu < ANGLE_GUARD {
        return Err(LambertError::SingularGeometry(dnu));
    }

    let mu = model.mu;
    let a_param = (r1n * r2n * (1.0 + cos_dnu)).sqrt();

    let tof = |z: f64| -> Option<(f64, f64)> {
        let c = stumpff_c(z);
        let s = stumpff_s(z);
        let y = r1n + r2n + a_param * (z * s - 1.0) / c.sqrt();
        if y < 0.0 {
            return None;
        }
        let chi = (y / c).sqrt();
        let t = (chi.powi(3) * s + a_param * y.sqrt()) / mu.sqrt();
        Some((t, y))
    };

    let four_pi2 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
    let mut z_hi = four_pi2 * (1.0 - 1e-10);
    let mut z_lo = -four_pi2;
    // Time of flight is increasing in z and tends to zero at the edge of the
    // y < 0 region, so push the lower bound down until dt is bracketed.
    loop {
        match tof(z_lo) {
            // y < 0: no arc here, t -> 0 just above; dt is bracketed.
            None => break,
            Some((t, _)) if t <= dt => break,
            Some(_) => {
                if z_lo < -1e12 {
                    return Err(LambertError::UnreachableTime { dt });
                }
                z_lo *= 4.0;
            }
        }
    }

    let mut z = 0.0;
    let mut converged = false;
    for _ in 0..MAX_ITERS {
        z = 0.5 * (z_lo + z_hi);
        match tof(z) {
            None => {
                z_lo = z;
            }
            Some((t, _)) => {
                if (t - dt).abs() < TIME_TOL {
                    converged = true;
                    break;
                }
                if t < dt {
                    z_lo = z;
                } else {
                    z_hi = z;
                }
            }
        }
    }
    if !converged {
        return Err(LambertError::NonConvergence(MAX_ITERS));
    }

    let (_, y) = tof(z).expect("converged iterate has y >= 0");
    let f = 1.0 - y / r1n;
    let g = a_param * (y / mu).sqrt();
    let gdot = 1.0 - y / r2n;
    let v1 = (r2 - f * r1) / g;
    let v2 = (gdot * r2 - r1) / g;

    Ok(LambertSolution {
        departure_velocity: v1,
        arrival_velocity: v2,
        transfer_angle: dnu,
    })
}

/// Output of [`solve_directed`]: the impulse at r1 and the resulting state of
/// motion when the arc reaches r2.
#[derive(Debug, Clone, Copy)]
pub struct DirectedImpulse {
    /// Velocity change to apply at r1, km/s.
    pub delta_v: Vector3<f64>,
    /// Pre-impulse velocity at r2 (arrival velocity of the flown arc), km/s.
    pub v_arrival: Vector3<f64>,
    /// True when the short-way coast direction disagreed with the incoming
    /// motion and the reflected (long-way) branch was flown.
    pub reflected: bool,
    /// Time actually spent coasting from r1 to r2, s. Equals the requested
    /// `dt` on the direct branch and the conic period minus `dt` on the
    /// reflected branch.
    pub coast_duration: f64,
    /// Swept angle of the flown arc, rad, in (0, 2*pi).
    pub transfer_angle: f64,
}

/// Whether the coast trajectory from (r1, v_in) sweeps towards r2 the short
/// way. Computed from the out-of-plane components of r1 x v_in and r1 x r2.
pub fn short_way_agrees(
    r1: &Vector3<f64>,
    r2: &Vector3<f64>,
    v_in: &Vector3<f64>,
) -> bool {
    r1.cross(v_in).dot(&r1.cross(r2)) > 0.0
}

/// Computes the impulse connecting the incoming state (r1, v_in) to r2 in
/// Lambert time `dt`, selecting the long-way branch by velocity reflection
/// when the incoming motion sweeps away from the short way.
pub fn solve_directed(
    r1: &Vector3<f64>,
    r2: &Vector3<f64>,
    dt: f64,
    v_in: &Vector3<f64>,
    model: &GravityModel,
) -> Result<DirectedImpulse, LambertError> {
    let sol = solve_short_way(r1, r2, dt, model)?;
    if short_way_agrees(r1, r2, v_in) {
        Ok(DirectedImpulse {
            delta_v: sol.departure_velocity - v_in,
            v_arrival: sol.arrival_velocity,
            reflected: false,
            coast_duration: dt,
            transfer_angle: sol.transfer_angle,
        })
    } else {
        // Reflected branch: post-impulse velocity is the negated short-way
        // departure velocity, so the same conic is traversed the other way
        // and reaches r2 after (period - dt).
        let energy =
            sol.departure_velocity.norm_squared() / 2.0 - model.mu / r1.norm();
        if energy >= 0.0 {
            return Err(LambertError::NonEllipticLongWay);
        }
        let a = -model.mu / (2.0 * energy);
        let period = 2.0 * std::f64::consts::PI * (a.powi(3) / model.mu).sqrt();
        Ok(DirectedImpulse {
            delta_v: -sol.departure_velocity - v_in,
            v_arrival: -sol.arrival_velocity,
            reflected: true,
            coast_duration: period - dt,
            transfer_angle: 2.0 * std::f64::consts::PI - sol.transfer_angle,
        })
    }
}
