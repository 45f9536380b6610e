//! Projected finite-difference gradient descent over impulse radii, angles,
//! and transfer times.
//!
//! The design vector for an n-impulse transfer is
//! [r_2..r_{n-1}, theta_1..theta_{n-1}, dt_1..dt_{n-1}] (dimension 3n-4);
//! the final impulse angle is pinned to its window edge. After every step
//! each angle is clipped into its window interval, with the bounds recomputed
//! from the current radii, interior radii are clipped above the body surface,
//! and transfer times are clipped above a floor.

use nalgebra::Vector3;
use thiserror::Error;

use crate::cost::{total_cost, CostBreakdown, Weights};
use crate::maneuver::{build_plan, detect_collision, ImpulsePlan};
use crate::twobody::{circular_state, GravityModel, RotationDirection};
use crate::window::{theta_max, WindowSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct DesignVector {
    /// Interior waypoint radii r_2..r_{n-1}, km (n-2 entries).
    pub radii: Vec<f64>,
    /// Impulse angles theta_1..theta_{n-1}, rad (n-1 entries).
    pub angles: Vec<f64>,
    /// Per-leg transfer times, s (n-1 entries).
    pub dts: Vec<f64>,
}

impl DesignVector {
    pub fn n_impulses(&self) -> usize {
        self.angles.len() + 1
    }

    pub fn dim(&self) -> usize {
        self.radii.len() + self.angles.len() + self.dts.len()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(&self.radii);
        v.extend_from_slice(&self.angles);
        v.extend_from_slice(&self.dts);
        v
    }

    pub fn from_flat(flat: &[f64], n: usize) -> Self {
        assert_eq!(flat.len(), 3 * n - 4);
        Self {
            radii: flat[..n - 2].to_vec(),
            angles: flat[n - 2..2 * n - 3].to_vec(),
            dts: flat[2 * n - 3..].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    /// Gradient step size.
    pub gamma: f64,
    /// Iteration count N.
    pub iterations: usize,
    /// Relative finite-difference perturbation.
    pub fd_epsilon: f64,
    /// Transfer-time floor, s.
    pub dt_min: f64,
    /// Halve gamma on cost increase (up to 30 times per step).
    pub backtracking: bool,
    /// Clearance above the body surface for interior radii, km.
    pub radius_margin: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            gamma: 1e-2,
            iterations: 500,
            fd_epsilon: 1e-6,
            dt_min: 1.0,
            backtracking: true,
            radius_margin: 1.0,
        }
    }
}

const MAX_HALVINGS: usize = 30;

/// The circle-to-circle transfer problem the optimizer works on.
#[derive(Debug, Clone)]
pub struct TransferProblem {
    pub model: GravityModel,
    /// km, from the body center.
    pub initial_radius: f64,
    /// km, from the body center.
    pub final_radius: f64,
    pub initial_direction: RotationDirection,
    pub final_direction: RotationDirection,
    pub n_impulses: usize,
    /// None disables the window: angles may range over the whole circle.
    pub window: Option<WindowSpec>,
    pub weights: Weights,
    /// Treat plans that cross the body surface as infeasible.
    pub forbid_collision: bool,
}

impl TransferProblem {
    /// Window half-width at an orbit radius from the center.
    pub fn theta_bound(&self, radius: f64) -> f64 {
        match &self.window {
            Some(w) => theta_max(w.alpha, (radius - self.model.body_radius).max(0.0), &self.model),
            None => std::f64::consts::PI,
        }
    }

    /// Radius of impulse i (0-based) under the design vector.
    pub fn impulse_radius(&self, x: &DesignVector, i: usize) -> f64 {
        let n = self.n_impulses;
        if i == 0 {
            self.initial_radius
        } else if i == n - 1 {
            self.final_radius
        } else {
            x.radii[i - 1]
        }
    }

    /// Pinned angle of the final impulse.
    pub fn final_angle(&self) -> f64 {
        self.theta_bound(self.final_radius)
    }

    /// Expands a design vector into build_plan inputs.
    pub fn assemble(
        &self,
        x: &DesignVector,
    ) -> (Vec<Vector3<f64>>, Vec<f64>, Vector3<f64>, Vector3<f64>) {
        let n = self.n_impulses;
        debug_assert_eq!(x.angles.len(), n - 1);
        debug_assert_eq!(x.radii.len(), n - 2);
        debug_assert_eq!(x.dts.len(), n - 1);
        let mut waypoints = Vec::with_capacity(n);
        for i in 0..n {
            let radius = self.impulse_radius(x, i);
            let angle = if i < n - 1 { x.angles[i] } else { self.final_angle() };
            waypoints.push(Vector3::new(radius * angle.cos(), radius * angle.sin(), 0.0));
        }
        let v_init = circular_state(
            self.initial_radius,
            x.angles[0],
            self.initial_direction,
            &self.model,
        )
        .velocity;
        let v_final = circular_state(
            self.final_radius,
            self.final_angle(),
            self.final_direction,
            &self.model,
        )
        .velocity;
        (waypoints, x.dts.clone(), v_init, v_final)
    }

    /// Builds the plan and evaluates the weighted cost. Plans that cannot be
    /// built (or collide, when forbidden) get an infinite total.
    pub fn evaluate(&self, x: &DesignVector) -> (CostBreakdown, Option<ImpulsePlan>) {
        let (waypoints, dts, v_init, v_final) = self.assemble(x);
        let plan = match build_plan(&waypoints, &dts, &v_init, &v_final, &self.model) {
            Ok(p) => p,
            Err(_) => return (CostBreakdown::infeasible(), None),
        };
        if self.forbid_collision {
            match detect_collision(&plan, &self.model) {
                Ok(hits) if hits.is_empty() => {}
                _ => return (CostBreakdown::infeasible(), Some(plan)),
            }
        }
        let window_max: Vec<f64> = (0..self.n_impulses - 1)
            .map(|i| self.theta_bound(self.impulse_radius(x, i)))
            .collect();
        match total_cost(&plan, &x.angles, &window_max, &self.weights) {
            Ok(b) => (b, Some(plan)),
            Err(_) => (CostBreakdown::infeasible(), Some(plan)),
        }
    }

    pub fn cost(&self, x: &DesignVector) -> f64 {
        self.evaluate(x).0.total
    }
}

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("initial design vector is infeasible after projection")]
    InfeasibleStart,
    #[error("cost is infinite at the expansion point and at all fallback perturbations")]
    GradientFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxIters,
    Stalled,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub best: DesignVector,
    pub plan: ImpulsePlan,
    pub cost: CostBreakdown,
    pub cost_history: Vec<CostBreakdown>,
    pub termination: Termination,
}

/// Forward-difference gradient of an arbitrary cost over the flattened design
/// vector, with backward-difference fallback for components whose forward
/// perturbation is infeasible.
pub fn fd_gradient_with<F>(
    x: &DesignVector,
    cost: F,
    fd_epsilon: f64,
) -> Result<Vec<f64>, OptimizeError>
where
    F: Fn(&DesignVector) -> f64,
{
    let n = x.n_impulses();
    let flat = x.to_flat();
    let j0 = cost(x);
    if !j0.is_finite() {
        return Err(OptimizeError::GradientFailed);
    }
    let mut grad = vec![0.0; flat.len()];
    for j in 0..flat.len() {
        let eps = fd_epsilon * flat[j].abs().max(1.0);
        let mut pert = flat.clone();
        pert[j] += eps;
        let jf = cost(&DesignVector::from_flat(&pert, n));
        if jf.is_finite() {
            grad[j] = (jf - j0) / eps;
            continue;
        }
        pert[j] = flat[j] - eps;
        let jb = cost(&DesignVector::from_flat(&pert, n));
        if jb.is_finite() {
            grad[j] = (j0 - jb) / eps;
        } else {
            // boxed in on both sides along this coordinate
            grad[j] = 0.0;
        }
    }
    Ok(grad)
}

/// Finite-difference gradient of the transfer cost.
pub fn fd_gradient(
    x: &DesignVector,
    problem: &TransferProblem,
    settings: &OptimizerSettings,
) -> Result<Vec<f64>, OptimizeError> {
    fd_gradient_with(x, |x| problem.cost(x), settings.fd_epsilon)
}

/// Clips a design vector into its box: angles into the window interval
/// recomputed from the current radii, radii above the surface, transfer times
/// above the floor.
pub fn project(
    x: &DesignVector,
    problem: &TransferProblem,
    settings: &OptimizerSettings,
) -> DesignVector {
    let mut out = x.clone();
    let floor = problem.model.body_radius + settings.radius_margin;
    for r in &mut out.radii {
        *r = r.max(floor);
    }
    for i in 0..out.angles.len() {
        let bound = problem.theta_bound(problem.impulse_radius(&out, i));
        let center = problem.window.map_or(0.0, |w| w.center_angle);
        out.angles[i] = out.angles[i].clamp(center - bound, center + bound);
    }
    for dt in &mut out.dts {
        *dt = dt.max(settings.dt_min);
    }
    out
}

/// Runs the projected descent from `x0` and returns the best iterate seen.
pub fn optimize(
    x0: &DesignVector,
    problem: &TransferProblem,
    settings: &OptimizerSettings,
) -> Result<OptimizationResult, OptimizeError> {
    let mut x = project(x0, problem, settings);
    let (mut jx, mut plan) = problem.evaluate(&x);
    if !jx.is_feasible() {
        return Err(OptimizeError::InfeasibleStart);
    }
    let mut best_x = x.clone();
    let mut best_j = jx;
    let mut best_plan = plan.clone();
    let mut history = vec![jx];
    let mut termination = Termination::MaxIters;
    // persistent step size: grows on clean acceptance, shrinks via
    // backtracking, so the descent adapts to the local cost scale
    let mut gamma_base = settings.gamma;

    for _ in 0..settings.iterations {
        let grad = match fd_gradient_with(&x, |x| problem.cost(x), settings.fd_epsilon) {
            Ok(g) => g,
            Err(_) => {
                termination = Termination::Infeasible;
                break;
            }
        };
        let flat = x.to_flat();
        let n = x.n_impulses();
        let mut gamma = gamma_base;
        let mut accepted = false;
        let mut halvings = 0;
        for _ in 0..=MAX_HALVINGS {
            // descend in coordinates normalized by the same max(1,|x|)
            // scale the finite difference uses, so kilometre- and
            // second-sized components move at commensurate rates
            let stepped: Vec<f64> = flat
                .iter()
                .zip(&grad)
                .map(|(xi, gi)| {
                    let scale = xi.abs().max(1.0);
                    xi - gamma * scale * scale * gi
                })
                .collect();
            let cand = project(&DesignVector::from_flat(&stepped, n), problem, settings);
            let (jc, pc) = problem.evaluate(&cand);
            let ok = if settings.backtracking {
                jc.total <= jx.total
            } else {
                jc.is_feasible()
            };
            if ok {
                x = cand;
                jx = jc;
                plan = pc;
                accepted = true;
                break;
            }
            if !settings.backtracking {
                break;
            }
            gamma /= 2.0;
            halvings += 1;
        }
        if accepted {
            gamma_base = if halvings == 0 {
                (gamma_base * 2.0).min(settings.gamma * 1e6)
            } else {
                gamma.max(settings.gamma * 1e-6)
            };
        }
        history.push(jx);
        if jx.total < best_j.total {
            best_x = x.clone();
            best_j = jx;
            best_plan = plan.clone();
        }
        if !accepted {
            termination = Termination::Stalled;
            break;
        }
    }

    Ok(OptimizationResult {
        best: best_x,
        plan: best_plan.expect("feasible best iterate has a plan"),
        cost: best_j,
        cost_history: history,
        termination,
    })
}

/// Default starting point.
///
/// With a window: solve the two-impulse transfer spanning the window (coarse
/// search over the transfer time), then place interior waypoints by sampling
/// the resulting arc at equal time fractions, so the n-impulse guess starts
/// at roughly the two-impulse cost. Without a window: angles spread evenly
/// toward the pinned final angle, radii interpolated, circular coast times.
pub fn initial_guess(problem: &TransferProblem) -> DesignVector {
    match problem.window {
        Some(_) => windowed_guess(problem).unwrap_or_else(|| spread_guess(problem)),
        None => spread_guess(problem),
    }
}

fn windowed_guess(problem: &TransferProblem) -> Option<DesignVector> {
    let n = problem.n_impulses;
    let model = &problem.model;
    let center = problem.window.map_or(0.0, |w| w.center_angle);
    let theta1 = center - 0.9 * problem.theta_bound(problem.initial_radius);
    let theta_n = problem.final_angle();
    let dtheta = theta_n - theta1;
    if dtheta <= 1e-4 {
        return None;
    }
    let omega = model.circular_rate(0.5 * (problem.initial_radius + problem.final_radius));

    let mut best: Option<(f64, f64)> = None;
    for k in 1..=60 {
        let dt = (dtheta / omega) * (0.2 + 2.8 * k as f64 / 60.0);
        if let Ok((dv1, dv2)) =
            crate::maneuver::two_impulse_costs(model, problem.initial_radius, problem.final_radius, dtheta, dt)
        {
            let total = dv1 + dv2;
            if best.map_or(true, |(_, b)| total < b) {
                best = Some((dt, total));
            }
        }
    }
    let (dt, _) = best?;

    // interior waypoints sampled along the two-impulse arc
    let s1 = circular_state(problem.initial_radius, theta1, problem.initial_direction, model);
    let target = nalgebra::Vector3::new(
        problem.final_radius * theta_n.cos(),
        problem.final_radius * theta_n.sin(),
        0.0,
    );
    let sol = crate::lambert::solve_short_way(&s1.position, &target, dt, model).ok()?;
    let dep = crate::twobody::StateVector::new(s1.position, sol.departure_velocity, 0.0);
    let mut radii = Vec::with_capacity(n - 2);
    let mut angles = vec![theta1];
    for k in 1..n - 1 {
        let t = dt * k as f64 / (n - 1) as f64;
        let s = crate::twobody::propagate(&dep, t, model).ok()?;
        radii.push(s.position.norm());
        angles.push(s.position.y.atan2(s.position.x));
    }
    let dts = vec![dt / (n - 1) as f64; n - 1];
    Some(DesignVector { radii, angles, dts })
}

fn spread_guess(problem: &TransferProblem) -> DesignVector {
    let n = problem.n_impulses;
    let radii: Vec<f64> = (1..n - 1)
        .map(|i| {
            let f = i as f64 / (n - 1) as f64;
            problem.initial_radius + f * (problem.final_radius - problem.initial_radius)
        })
        .collect();
    let center = problem.window.map_or(0.0, |w| w.center_angle);
    let span = problem.final_angle() - center;
    let angles: Vec<f64> = (0..n - 1)
        .map(|i| center + span * (i + 1) as f64 / n as f64)
        .collect();
    let x_partial = DesignVector { radii, angles, dts: vec![0.0; n - 1] };
    let mut dts = Vec::with_capacity(n - 1);
    for leg in 0..n - 1 {
        let theta_from = x_partial.angles[leg];
        let theta_to = if leg + 1 < n - 1 {
            x_partial.angles[leg + 1]
        } else {
            problem.final_angle()
        };
        let r_mean = 0.5
            * (problem.impulse_radius(&x_partial, leg)
                + problem.impulse_radius(&x_partial, leg + 1));
        let dtheta = (theta_to - theta_from).abs().max(0.05);
        dts.push(dtheta / problem.model.circular_rate(r_mean));
    }
    DesignVector { radii: x_partial.radii, angles: x_partial.angles, dts }
}

/// Deterministic perturbation of a starting point, used for multi-start.
/// Seed 0 is the unperturbed guess.
pub fn perturb_guess(guess: &DesignVector, problem: &TransferProblem, seed: u64) -> DesignVector {
    if seed == 0 {
        return guess.clone();
    }
    let mut out = guess.clone();
    let s = seed as f64;
    for (i, theta) in out.angles.iter_mut().enumerate() {
        let bound = problem.theta_bound(problem.impulse_radius(guess, i));
        *theta += 0.4 * bound * (997.0 * s + 13.0 * i as f64).sin();
    }
    for (i, dt) in out.dts.iter_mut().enumerate() {
        *dt *= 1.0 + 0.3 * (757.0 * s + 29.0 * i as f64).sin();
    }
    for (i, r) in out.radii.iter_mut().enumerate() {
        let span = (problem.final_radius - problem.initial_radius).abs().max(1.0);
        *r += 0.2 * span * (389.0 * s + 7.0 * i as f64).sin();
    }
    out
}

/// Projected, feasible starting points: the first feasible candidate guess
/// plus `seeds` deterministic perturbations of it.
pub fn starting_points(
    problem: &TransferProblem,
    settings: &OptimizerSettings,
    seeds: u64,
) -> Vec<DesignVector> {
    let mut starts = Vec::new();
    for cand in guess_candidates(problem) {
        let x = project(&cand, problem, settings);
        if problem.cost(&x).is_finite() {
            starts.push(x.clone());
            for seed in 1..=seeds {
                let p = project(&perturb_guess(&x, problem, seed), problem, settings);
                if problem.cost(&p).is_finite() {
                    starts.push(p);
                }
            }
            break;
        }
    }
    starts
}

/// Runs the descent from every starting point and keeps the best result.
pub fn optimize_multi(
    problem: &TransferProblem,
    settings: &OptimizerSettings,
    seeds: u64,
) -> Result<OptimizationResult, OptimizeError> {
    let mut best: Option<OptimizationResult> = None;
    for x0 in starting_points(problem, settings, seeds) {
        let res = optimize(&x0, problem, settings)?;
        if best.as_ref().map_or(true, |b| res.cost.total < b.cost.total) {
            best = Some(res);
        }
    }
    best.ok_or(OptimizeError::InfeasibleStart)
}

/// Starting points tried in order by the command layer when the plain guess
/// is infeasible (for example when the plain guess puts a leg exactly at the
/// half-turn Lambert singularity).
pub fn guess_candidates(problem: &TransferProblem) -> Vec<DesignVector> {
    let base = initial_guess(problem);
    let mut out = vec![base.clone()];
    for shift in [0.05, -0.05, 0.15, -0.15, 0.3, -0.3] {
        let mut g = base.clone();
        for theta in &mut g.angles {
            *theta += shift;
        }
        out.push(g);
    }
    out
}
