//! Shared fixtures for the criterion benchmarks.

use mvr_core::cost::Weights;
use mvr_core::optimizer::TransferProblem;
use mvr_core::twobody::{GravityModel, RotationDirection};
use mvr_core::window::WindowSpec;

pub fn mars_model() -> GravityModel {
    GravityModel::new(42828.37, 3389.5)
}

pub fn mars_problem(n_impulses: usize) -> TransferProblem {
    let model = mars_model();
    TransferProblem {
        initial_radius: model.body_radius + 500.0,
        final_radius: model.body_radius + 1000.0,
        initial_direction: RotationDirection::Ccw,
        final_direction: RotationDirection::Ccw,
        n_impulses,
        window: Some(WindowSpec::new(60f64.to_radians())),
        weights: Weights { w_ce: 1.0, w_mi: 0.0, w_v: 0.0 },
        forbid_collision: false,
        model,
    }
}
