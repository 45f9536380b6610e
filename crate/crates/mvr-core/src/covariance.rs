//! Simplified polar-coordinate covariance propagation: variances contract
//! toward sqrt(R*Q) along a closed-form law inside the observation window and
//! grow linearly outside it. The full matrix rate expression is kept as a
//! standalone diagnostic.
//!
//! This module is diagnostic only. The optimizer never consumes covariance
//! values; the window-end deferral term in the cost stands in for them.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::twobody::GravityModel;

/// Process-noise diagonal (r, theta, omega) and measurement-noise diagonal
/// (r, theta).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub q: [f64; 3],
    pub r_meas: [f64; 2],
}

#[derive(Debug, Error)]
pub enum CovarianceError {
    #[error("closed form left its validity domain (denominator became non-positive)")]
    DomainExceeded,
    #[error("segments must be time-ordered and non-overlapping")]
    OverlappingSegments,
}

/// Right-hand side of the covariance matrix equation: kinematic coupling of
/// the angle-rate uncertainty into the angle, minus the measurement-update
/// quadratic terms, plus process noise.
pub fn riccati_rhs(p: &Matrix3<f64>, noise: &NoiseModel) -> Matrix3<f64> {
    let (p11, p22, p23, p33) = (p[(0, 0)], p[(1, 1)], p[(1, 2)], p[(2, 2)]);
    let (r11, r22) = (noise.r_meas[0], noise.r_meas[1]);
    let drift = Matrix3::new(
        0.0, 0.0, 0.0, //
        0.0, 0.0, p22, //
        0.0, p22, 2.0 * p23,
    );
    let update = Matrix3::new(
        p11 * p11 / r11, 0.0, 0.0, //
        0.0, p22 * p22 / r22, p22 * p23 / r22, //
        0.0, p22 * p23 / r22, p33 * p33 / r22,
    );
    let q = Matrix3::from_diagonal(&nalgebra::Vector3::new(noise.q[0], noise.q[1], noise.q[2]));
    drift - update + q
}

/// Closed-form in-window variance law with p(0) = p0: the exact solution of
/// the rate form in [`variance_rate`], contracting toward sqrt(R*Q) from
/// above.
pub fn p_closed_form(p0: f64, r_ii: f64, q_ii: f64, t: f64) -> Result<f64, CovarianceError> {
    let s = (r_ii * q_ii).sqrt();
    let denom = r_ii + (p0 - s) * t;
    if denom <= 0.0 {
        return Err(CovarianceError::DomainExceeded);
    }
    Ok((r_ii * p0 + s * (p0 - s) * t) / denom)
}

/// The closed form re-parametrized by the swept angle of a circular orbit of
/// the given radius.
pub fn p_of_theta(
    p0: f64,
    r_ii: f64,
    q_ii: f64,
    orbit_radius: f64,
    theta: f64,
    model: &GravityModel,
) -> Result<f64, CovarianceError> {
    let t = theta * (orbit_radius.powi(3) / model.mu).sqrt();
    p_closed_form(p0, r_ii, q_ii, t)
}

/// Rate form of the decoupled in-window variance law; `p_closed_form` is its
/// exact solution, with fixed point sqrt(R*Q).
pub fn variance_rate(p: f64, r_ii: f64, q_ii: f64) -> f64 {
    let s = (r_ii * q_ii).sqrt();
    -(p - s) * (p - s) / r_ii
}

/// Measurement variance paired with diagonal element `i`: the angle and
/// angle-rate elements share the angle measurement.
fn r_for_element(noise: &NoiseModel, i: usize) -> f64 {
    if i == 0 {
        noise.r_meas[0]
    } else {
        noise.r_meas[1]
    }
}

/// One contiguous stretch of the timeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub in_window: bool,
}

#[derive(Debug, Clone)]
struct TrackSegment {
    seg: Segment,
    /// Variances at the segment start (continuity with the previous
    /// segment's end).
    p_start: [f64; 3],
}

/// Variance history over a sequence of in-window and out-of-window segments.
#[derive(Debug, Clone)]
pub struct CovarianceTrack {
    segments: Vec<TrackSegment>,
    noise: NoiseModel,
    orbit_radius: f64,
}

fn step_segment(
    p: [f64; 3],
    noise: &NoiseModel,
    span: f64,
    in_window: bool,
) -> Result<[f64; 3], CovarianceError> {
    let mut out = p;
    for i in 0..3 {
        out[i] = if in_window {
            p_closed_form(p[i], r_for_element(noise, i), noise.q[i], span)?
        } else {
            p[i] + noise.q[i] * span
        };
    }
    Ok(out)
}

impl CovarianceTrack {
    pub fn p_diag(&self, t: f64) -> [f64; 3] {
        let seg = self
            .segments
            .iter()
            .rev()
            .find(|s| t >= s.seg.start)
            .unwrap_or(&self.segments[0]);
        let span = (t - seg.seg.start).clamp(0.0, seg.seg.end - seg.seg.start);
        // the closed form's denominator is linear in t and was checked
        // positive at the segment end, so mid-segment evaluation cannot fail
        step_segment(seg.p_start, &self.noise, span, seg.seg.in_window)
            .expect("segment already validated")
    }

    pub fn segments(&self) -> Vec<Segment> {
        self.segments.iter().map(|s| s.seg).collect()
    }

    pub fn orbit_radius(&self) -> f64 {
        self.orbit_radius
    }
}

/// Propagates the diagonal variances through the given timeline. In-window
/// segments contract toward sqrt(R*Q) along the closed form; out-of-window
/// segments grow each variance linearly at its process-noise rate, starting
/// from the in-window exit value.
pub fn propagate_track(
    p0_diag: [f64; 3],
    noise: &NoiseModel,
    segments: &[Segment],
    orbit_radius: f64,
    _model: &GravityModel,
) -> Result<CovarianceTrack, CovarianceError> {
    for w in segments.windows(2) {
        if w[1].start < w[0].end {
            return Err(CovarianceError::OverlappingSegments);
        }
    }
    let mut p = p0_diag;
    let mut track = Vec::with_capacity(segments.len());
    for seg in segments {
        track.push(TrackSegment { seg: *seg, p_start: p });
        p = step_segment(p, noise, seg.end - seg.start, seg.in_window)?;
    }
    Ok(CovarianceTrack { segments: track, noise: *noise, orbit_radius })
}
