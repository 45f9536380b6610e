//! n-impulse plan construction: chains the directed Lambert solver across
//! consecutive waypoints, threading each arc's arrival velocity into the next
//! leg, and closes with the circularizing impulse at the final waypoint.

use nalgebra::Vector3;
use thiserror::Error;

use crate::lambert::{solve_directed, solve_short_way, LambertError};
use crate::twobody::{propagate, GravityModel, PropagateError, StateVector};

#[derive(Debug, Clone, Copy)]
pub struct Impulse {
    /// km
    pub position: Vector3<f64>,
    /// s
    pub epoch: f64,
    /// km/s
    pub delta_v: Vector3<f64>,
}

/// Unpowered conic segment flown between consecutive impulses.
#[derive(Debug, Clone, Copy)]
pub struct CoastArc {
    /// Post-impulse state at the start of the arc.
    pub initial: StateVector,
    /// s
    pub duration: f64,
}

#[derive(Debug, Clone)]
pub struct ImpulsePlan {
    pub impulses: Vec<Impulse>,
    pub coast_arcs: Vec<CoastArc>,
    /// Sum of impulse magnitudes, km/s.
    pub total_dv: f64,
    /// Largest single impulse magnitude, km/s.
    pub max_dv: f64,
}

impl ImpulsePlan {
    pub fn n_impulses(&self) -> usize {
        self.impulses.len()
    }

    pub fn impulse_magnitudes(&self) -> Vec<f64> {
        self.impulses.iter().map(|i| i.delta_v.norm()).collect()
    }
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("need at least 2 waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("expected {expected} transfer times for {n} waypoints, got {got}")]
    LengthMismatch { expected: usize, n: usize, got: usize },
    #[error("transfer time {dt} on leg {leg} is not positive")]
    NonPositiveTime { leg: usize, dt: f64 },
    #[error("Lambert solution failed on leg {leg}: {source}")]
    Leg {
        leg: usize,
        #[source]
        source: LambertError,
    },
    #[error(transparent)]
    Propagate(#[from] PropagateError),
}

/// Builds an n-impulse plan from waypoint positions and per-leg Lambert
/// transfer times. `v_initial` is the pre-impulse velocity on the initial
/// orbit at the first waypoint; `v_final` the post-impulse velocity on the
/// target orbit at the last waypoint.
pub fn build_plan(
    waypoints: &[Vector3<f64>],
    dts: &[f64],
    v_initial: &Vector3<f64>,
    v_final: &Vector3<f64>,
    model: &GravityModel,
) -> Result<ImpulsePlan, PlanError> {
    let n = waypoints.len();
    if n < 2 {
        return Err(PlanError::TooFewWaypoints(n));
    }
    if dts.len() != n - 1 {
        return Err(PlanError::LengthMismatch { expected: n - 1, n, got: dts.len() });
    }
    for (leg, &dt) in dts.iter().enumerate() {
        if !(dt > 0.0) {
            return Err(PlanError::NonPositiveTime { leg, dt });
        }
    }

    let mut impulses = Vec::with_capacity(n);
    let mut coast_arcs = Vec::with_capacity(n - 1);
    let mut epoch = 0.0;
    let mut v_minus = *v_initial;

    for leg in 0..n - 1 {
        let d = solve_directed(&waypoints[leg], &waypoints[leg + 1], dts[leg], &v_minus, model)
            .map_err(|source| PlanError::Leg { leg, source })?;
        impulses.push(Impulse {
            position: waypoints[leg],
            epoch,
            delta_v: d.delta_v,
        });
        coast_arcs.push(CoastArc {
            initial: StateVector::new(waypoints[leg], v_minus + d.delta_v, epoch),
            duration: d.coast_duration,
        });
        epoch += d.coast_duration;
        v_minus = d.v_arrival;
    }

    impulses.push(Impulse {
        position: waypoints[n - 1],
        epoch,
        delta_v: v_final - v_minus,
    });

    let mags: Vec<f64> = impulses.iter().map(|i| i.delta_v.norm()).collect();
    Ok(ImpulsePlan {
        impulses,
        coast_arcs,
        total_dv: mags.iter().sum(),
        max_dv: mags.iter().cloned().fold(0.0, f64::max),
    })
}

/// Both impulse magnitudes of a two-impulse circle-to-circle transfer with
/// departure angle 0, arrival angle `dtheta`, and transfer time `dt`, both
/// orbits counterclockwise.
pub fn two_impulse_costs(
    model: &GravityModel,
    r1: f64,
    r2: f64,
    dtheta: f64,
    dt: f64,
) -> Result<(f64, f64), LambertError> {
    use crate::twobody::{circular_state, RotationDirection};
    let s1 = circular_state(r1, 0.0, RotationDirection::Ccw, model);
    let s2 = circular_state(r2, dtheta, RotationDirection::Ccw, model);
    let sol = solve_short_way(&s1.position, &s2.position, dt, model)?;
    let dv1 = (sol.departure_velocity - s1.velocity).norm();
    let dv2 = (s2.velocity - sol.arrival_velocity).norm();
    Ok((dv1, dv2))
}

/// Time-ordered states along every coast arc, including both endpoints.
pub fn sample_trajectory(
    plan: &ImpulsePlan,
    samples_per_arc: usize,
    model: &GravityModel,
) -> Result<Vec<StateVector>, PropagateError> {
    assert!(samples_per_arc >= 2);
    let mut out = Vec::with_capacity(plan.coast_arcs.len() * samples_per_arc);
    for arc in &plan.coast_arcs {
        for k in 0..samples_per_arc {
            let t = arc.duration * k as f64 / (samples_per_arc - 1) as f64;
            out.push(propagate(&arc.initial, t, model)?);
        }
    }
    Ok(out)
}

/// Conic elements needed for the sub-surface test.
struct ArcConic {
    /// semilatus rectum, km
    p: f64,
    e: f64,
    /// signed true anomaly at the arc start, rad in (-pi, pi]
    nu0: f64,
    /// anomaly swept over the arc, rad in [0, 2*pi)
    swept: f64,
}

fn arc_conic(arc: &CoastArc, model: &GravityModel) -> Result<ArcConic, PropagateError> {
    let mu = model.mu;
    let r = arc.initial.position;
    let v = arc.initial.velocity;
    let h = r.cross(&v);
    let p = h.norm_squared() / mu;
    let evec = v.cross(&h) / mu - r.normalize();
    let e = evec.norm();

    let nu_of = |state: &StateVector| -> f64 {
        if e < 1e-12 {
            return 0.0; // circular: anomaly reference arbitrary
        }
        let cosnu = (evec.dot(&state.position) / (e * state.position.norm())).clamp(-1.0, 1.0);
        let nu = cosnu.acos();
        if state.position.dot(&state.velocity) >= 0.0 {
            nu
        } else {
            -nu
        }
    };

    let nu0 = nu_of(&arc.initial);
    let end = propagate(&arc.initial, arc.duration, model)?;
    let nu1 = nu_of(&end);
    let swept = (nu1 - nu0).rem_euclid(2.0 * std::f64::consts::PI);
    Ok(ArcConic { p, e, nu0, swept })
}

/// Time from periapsis at signed true anomaly `nu` (rad, in (-pi, pi]).
fn time_from_periapsis(p: f64, e: f64, nu: f64, mu: f64) -> f64 {
    if e < 1.0 {
        let a = p / (1.0 - e * e);
        let ecc = 2.0 * ((1.0 - e).sqrt() * (nu / 2.0).sin())
            .atan2((1.0 + e).sqrt() * (nu / 2.0).cos());
        let m = ecc - e * ecc.sin();
        m * (a.powi(3) / mu).sqrt()
    } else {
        let a = p / (1.0 - e * e); // negative
        let hh = 2.0 * (((e - 1.0) / (e + 1.0)).sqrt() * (nu / 2.0).tan()).atanh();
        let m = e * hh.sinh() - hh;
        m * ((-a).powi(3) / mu).sqrt()
    }
}

/// Scans every coast arc for a surface crossing. Returns (arc index, epoch of
/// first descent below the body radius) for each offending arc. Detection is
/// by conic geometry: periapsis radius against the body radius, then whether
/// the traversed anomaly range enters the sub-surface band around periapsis.
pub fn detect_collision(
    plan: &ImpulsePlan,
    model: &GravityModel,
) -> Result<Vec<(usize, f64)>, PropagateError> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut hits = Vec::new();
    for (idx, arc) in plan.coast_arcs.iter().enumerate() {
        let conic = arc_conic(arc, model)?;
        let rp = conic.p / (1.0 + conic.e);
        if rp >= model.body_radius || conic.e < 1e-12 {
            continue;
        }
        // |nu| < nu_surf is below the surface
        let cos_nu_surf = ((conic.p / model.body_radius - 1.0) / conic.e).clamp(-1.0, 1.0);
        let nu_surf = cos_nu_surf.acos();

        // Walk the traversed unwrapped interval [nu0, nu0 + swept] and find
        // the first entry into a band (2*pi*k - nu_surf, 2*pi*k + nu_surf).
        let start = conic.nu0;
        let end = conic.nu0 + conic.swept;
        let mut entry: Option<f64> = None;
        let k_min = ((start - nu_surf) / two_pi).floor() as i64;
        let k_max = ((end + nu_surf) / two_pi).ceil() as i64;
        for k in k_min..=k_max {
            let lo = k as f64 * two_pi - nu_surf;
            let hi = k as f64 * two_pi + nu_surf;
            if hi <= start || lo >= end {
                continue;
            }
            entry = Some(lo.max(start));
            break;
        }
        if let Some(nu_entry) = entry {
            // Wrap to principal range for the time-from-periapsis conversion,
            // then restore the whole revolutions.
            let wrapped = (nu_entry + std::f64::consts::PI).rem_euclid(two_pi)
                - std::f64::consts::PI;
            let revs = ((nu_entry - wrapped) / two_pi).round();
            let period = if conic.e < 1.0 {
                let a = conic.p / (1.0 - conic.e * conic.e);
                two_pi * (a.powi(3) / model.mu).sqrt()
            } else {
                0.0
            };
            let t_entry = time_from_periapsis(conic.p, conic.e, wrapped, model.mu)
                + revs * period;
            let nu0_wrapped = (conic.nu0 + std::f64::consts::PI).rem_euclid(two_pi)
                - std::f64::consts::PI;
            let t0 = time_from_periapsis(conic.p, conic.e, nu0_wrapped, model.mu);
            hits.push((idx, arc.initial.epoch + (t_entry - t0)));
        }
    }
    Ok(hits)
}
