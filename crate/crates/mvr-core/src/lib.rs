//! Planning and optimization of planar multi-impulse transfers between
//! circular orbits, with impulses restricted to a ground-station visibility
//! window.
//!
//! The crate is organized bottom-up: Kepler propagation ([`twobody`]), a
//! boundary-value solver for single legs ([`lambert`]), plan assembly and
//! collision screening ([`maneuver`]), objective functions ([`cost`]),
//! tracking-uncertainty diagnostics ([`covariance`]), window geometry
//! ([`window`]), the projected-descent optimizer ([`optimizer`]), scenario
//! files ([`scenario`]), and the command layer that writes result files
//! ([`runner`]).

pub mod cost;
pub mod covariance;
pub mod lambert;
pub mod maneuver;
pub mod optimizer;
pub mod runner;
pub mod scenario;
pub mod twobody;
pub mod window;

pub use cost::{CostBreakdown, Weights};
pub use lambert::{DirectedImpulse, LambertSolution};
pub use maneuver::{CoastArc, Impulse, ImpulsePlan};
pub use optimizer::{
    DesignVector, OptimizationResult, OptimizerSettings, Termination, TransferProblem,
};
pub use runner::{run, Command, RunError, Summary};
pub use scenario::{load_scenario, load_scenario_with_overrides, Scenario, ScenarioError};
pub use twobody::{GravityModel, RotationDirection, StateVector};
pub use window::WindowSpec;
