//! Command execution and result persistence: CSV tables and a JSON summary,
//! written deterministically so repeated runs are byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::CostBreakdown;
use crate::covariance::{propagate_track, Segment};
use crate::lambert::LambertError;
use crate::maneuver::{detect_collision, two_impulse_costs, ImpulsePlan};
use crate::optimizer::{optimize_multi, starting_points, Termination, TransferProblem};
use crate::scenario::Scenario;
use crate::twobody::{propagate, PropagateError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Plan,
    Optimize,
    Scan,
    Covariance,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Plan => "plan",
            Command::Optimize => "optimize",
            Command::Scan => "scan",
            Command::Covariance => "covariance",
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("no feasible starting point found for this scenario")]
    InfeasibleScenario,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Propagate(#[from] PropagateError),
    #[error("scan grid point failed: {0}")]
    Scan(#[from] LambertError),
    #[error("covariance propagation failed: {0}")]
    Covariance(#[from] crate::covariance::CovarianceError),
    #[error(transparent)]
    Optimize(#[from] crate::optimizer::OptimizeError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollisionReport {
    pub arc_index: usize,
    pub epoch_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowBoundReport {
    pub index: usize,
    pub theta_min_rad: f64,
    pub theta_max_rad: f64,
}

/// Machine-readable run outcome, persisted as `summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub command: String,
    pub feasible: bool,
    pub error: Option<String>,
    pub cost: Option<CostBreakdown>,
    pub total_dv_kms: Option<f64>,
    pub max_dv_kms: Option<f64>,
    pub termination: Option<Termination>,
    pub iterations_run: Option<usize>,
    pub collisions: Vec<CollisionReport>,
    pub window_bounds: Vec<WindowBoundReport>,
}

impl Summary {
    fn empty(command: Command) -> Self {
        Self {
            command: command.name().to_string(),
            feasible: false,
            error: None,
            cost: None,
            total_dv_kms: None,
            max_dv_kms: None,
            termination: None,
            iterations_run: None,
            collisions: Vec::new(),
            window_bounds: Vec::new(),
        }
    }
}

fn fmt_f(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.12e}")
    } else {
        format!("{x}")
    }
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<(), RunError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), content)?;
    Ok(())
}

const TRAJECTORY_SAMPLES_PER_ARC: usize = 200;

fn write_plan_outputs(
    plan: &ImpulsePlan,
    problem: &TransferProblem,
    out_dir: &Path,
) -> Result<(Vec<CollisionReport>, Vec<WindowBoundReport>), RunError> {
    let model = &problem.model;

    let mut impulses = String::from(
        "index,epoch_s,x_km,y_km,theta_rad,dvx_kms,dvy_kms,dvz_kms,dv_mag_kms\n",
    );
    for (i, imp) in plan.impulses.iter().enumerate() {
        let theta = imp.position.y.atan2(imp.position.x);
        writeln!(
            impulses,
            "{i},{},{},{},{},{},{},{},{}",
            fmt_f(imp.epoch),
            fmt_f(imp.position.x),
            fmt_f(imp.position.y),
            fmt_f(theta),
            fmt_f(imp.delta_v.x),
            fmt_f(imp.delta_v.y),
            fmt_f(imp.delta_v.z),
            fmt_f(imp.delta_v.norm()),
        )
        .unwrap();
    }
    write_file(out_dir, "impulses.csv", &impulses)?;

    let mut trajectory = String::from("epoch_s,x_km,y_km,arc_index\n");
    for (arc_index, arc) in plan.coast_arcs.iter().enumerate() {
        for k in 0..TRAJECTORY_SAMPLES_PER_ARC {
            let t = arc.duration * k as f64 / (TRAJECTORY_SAMPLES_PER_ARC - 1) as f64;
            let s = propagate(&arc.initial, t, model)?;
            writeln!(
                trajectory,
                "{},{},{},{arc_index}",
                fmt_f(s.epoch),
                fmt_f(s.position.x),
                fmt_f(s.position.y),
            )
            .unwrap();
        }
    }
    write_file(out_dir, "trajectory.csv", &trajectory)?;

    let collisions: Vec<CollisionReport> = detect_collision(plan, model)?
        .into_iter()
        .map(|(arc_index, epoch_s)| CollisionReport { arc_index, epoch_s })
        .collect();
    let window_bounds: Vec<WindowBoundReport> = plan
        .impulses
        .iter()
        .enumerate()
        .map(|(index, imp)| {
            let bound = problem.theta_bound(imp.position.norm());
            WindowBoundReport { index, theta_min_rad: -bound, theta_max_rad: bound }
        })
        .collect();
    Ok((collisions, window_bounds))
}

fn write_summary(summary: &Summary, out_dir: &Path) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
    text.push('\n');
    write_file(out_dir, "summary.json", &text)
}

fn run_plan(scenario: &Scenario, out_dir: &Path, seeds: u64) -> Result<Summary, RunError> {
    let problem = scenario.problem();
    let starts = starting_points(&problem, &scenario.optimizer, seeds);
    let x = starts.first().ok_or(RunError::InfeasibleScenario)?;
    let (cost, plan) = problem.evaluate(x);
    let plan = plan.ok_or(RunError::InfeasibleScenario)?;
    let (collisions, window_bounds) = write_plan_outputs(&plan, &problem, out_dir)?;
    let mut summary = Summary::empty(Command::Plan);
    summary.feasible = true;
    summary.cost = Some(cost);
    summary.total_dv_kms = Some(plan.total_dv);
    summary.max_dv_kms = Some(plan.max_dv);
    summary.collisions = collisions;
    summary.window_bounds = window_bounds;
    Ok(summary)
}

fn run_optimize(scenario: &Scenario, out_dir: &Path, seeds: u64) -> Result<Summary, RunError> {
    let problem = scenario.problem();
    let res = optimize_multi(&problem, &scenario.optimizer, seeds)
        .map_err(|_| RunError::InfeasibleScenario)?;
    let (collisions, window_bounds) = write_plan_outputs(&res.plan, &problem, out_dir)?;
    let mut summary = Summary::empty(Command::Optimize);
    summary.feasible = true;
    summary.cost = Some(res.cost);
    summary.total_dv_kms = Some(res.plan.total_dv);
    summary.max_dv_kms = Some(res.plan.max_dv);
    summary.termination = Some(res.termination);
    summary.iterations_run = Some(res.cost_history.len() - 1);
    summary.collisions = collisions;
    summary.window_bounds = window_bounds;
    Ok(summary)
}

const SCAN_GRID: usize = 101;

fn run_scan(scenario: &Scenario, out_dir: &Path) -> Result<Summary, RunError> {
    let problem = scenario.problem();
    let model = problem.model;
    let r1 = problem.initial_radius;
    let r2 = problem.final_radius;
    let t_ref = model.circular_period(0.5 * (r1 + r2));

    let mut csv = String::from("dt_s,dtheta_rad,j_ce_kms,j_mi_kms\n");
    for i in 0..SCAN_GRID {
        let dt = t_ref * (0.02 + (1.2 - 0.02) * i as f64 / (SCAN_GRID - 1) as f64);
        for j in 0..SCAN_GRID {
            let dtheta =
                0.05 + (std::f64::consts::PI - 0.1) * j as f64 / (SCAN_GRID - 1) as f64;
            let (dv1, dv2) = two_impulse_costs(&model, r1, r2, dtheta, dt)?;
            writeln!(
                csv,
                "{},{},{},{}",
                fmt_f(dt),
                fmt_f(dtheta),
                fmt_f(dv1 + dv2),
                fmt_f(dv1.max(dv2)),
            )
            .unwrap();
        }
    }
    write_file(out_dir, "costsurface.csv", &csv)?;
    let mut summary = Summary::empty(Command::Scan);
    summary.feasible = true;
    Ok(summary)
}

const COVARIANCE_SAMPLES_PER_SEGMENT: usize = 200;

fn run_covariance(scenario: &Scenario, out_dir: &Path) -> Result<Summary, RunError> {
    let problem = scenario.problem();
    let model = problem.model;
    let radius = problem.initial_radius;
    let theta_bound = problem.theta_bound(radius);
    let omega = model.circular_rate(radius);
    let t_window = 2.0 * theta_bound / omega;
    let t_gap = (2.0 * std::f64::consts::PI - 2.0 * theta_bound) / omega;

    let mut segments = Vec::new();
    let mut t = 0.0;
    for _ in 0..scenario.covariance.revolutions {
        if t_window > 0.0 {
            segments.push(Segment { start: t, end: t + t_window, in_window: true });
            t += t_window;
        }
        if t_gap > 0.0 {
            segments.push(Segment { start: t, end: t + t_gap, in_window: false });
            t += t_gap;
        }
    }
    if t_window > 0.0 {
        segments.push(Segment { start: t, end: t + t_window, in_window: true });
    }
    if segments.is_empty() {
        return Err(RunError::InfeasibleScenario);
    }

    let track = propagate_track(
        scenario.covariance.p0,
        &scenario.covariance.noise,
        &segments,
        radius,
        &model,
    )?;
    let mut csv = String::from("t_s,p11,p22,p33\n");
    for seg in track.segments() {
        for k in 0..COVARIANCE_SAMPLES_PER_SEGMENT {
            let t = seg.start
                + (seg.end - seg.start) * k as f64 / (COVARIANCE_SAMPLES_PER_SEGMENT - 1) as f64;
            let p = track.p_diag(t);
            writeln!(csv, "{},{},{},{}", fmt_f(t), fmt_f(p[0]), fmt_f(p[1]), fmt_f(p[2]))
                .unwrap();
        }
    }
    write_file(out_dir, "covariance.csv", &csv)?;
    let mut summary = Summary::empty(Command::Covariance);
    summary.feasible = true;
    Ok(summary)
}

/// Executes a command against a validated scenario, writing all result files
/// under `out_dir`. On failure a summary with the error message is still
/// written so downstream tooling always finds `summary.json`.
pub fn run(
    command: Command,
    scenario: &Scenario,
    out_dir: &Path,
    seeds: u64,
) -> Result<Summary, RunError> {
    let result = match command {
        Command::Plan => run_plan(scenario, out_dir, seeds),
        Command::Optimize => run_optimize(scenario, out_dir, seeds),
        Command::Scan => run_scan(scenario, out_dir),
        Command::Covariance => run_covariance(scenario, out_dir),
    };
    match result {
        Ok(summary) => {
            write_summary(&summary, out_dir)?;
            Ok(summary)
        }
        Err(err) => {
            let mut summary = Summary::empty(command);
            summary.error = Some(err.to_string());
            write_summary(&summary, out_dir)?;
            Err(err)
        }
    }
}
