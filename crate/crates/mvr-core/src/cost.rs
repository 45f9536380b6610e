//! Cost terms of the windowed transfer problem: control effort, maximum
//! single impulse, and the window-end deferral proxy for estimation
//! uncertainty, combined as a weighted sum.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::maneuver::ImpulsePlan;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    pub w_ce: f64,
    pub w_mi: f64,
    pub w_v: f64,
}

impl Weights {
    pub fn validate(&self) -> Result<(), CostError> {
        if self.w_ce < 0.0 || self.w_mi < 0.0 || self.w_v < 0.0 {
            return Err(CostError::NegativeWeight);
        }
        if self.w_ce == 0.0 && self.w_mi == 0.0 && self.w_v == 0.0 {
            return Err(CostError::AllWeightsZero);
        }
        Ok(())
    }
}

/// Per-term cost values. The weighted total mixes km/s and rad; the weights
/// absorb the units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// km/s
    pub j_ce: f64,
    /// km/s
    pub j_mi: f64,
    /// rad
    pub j_v: f64,
    pub total: f64,
}

impl CostBreakdown {
    /// Marker value for plans that could not be built (Lambert failure or a
    /// forbidden collision): infinite total, zero terms.
    pub fn infeasible() -> Self {
        Self { j_ce: 0.0, j_mi: 0.0, j_v: 0.0, total: f64::INFINITY }
    }

    pub fn is_feasible(&self) -> bool {
        self.total.is_finite()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CostError {
    #[error("angle and window lists have different lengths")]
    LengthMismatch,
    #[error("weights must be non-negative")]
    NegativeWeight,
    #[error("at least one weight must be positive")]
    AllWeightsZero,
}

/// Sum of impulse magnitudes, km/s.
pub fn control_effort(plan: &ImpulsePlan) -> f64 {
    plan.impulses.iter().map(|i| i.delta_v.norm()).sum()
}

/// Largest single impulse magnitude, km/s.
pub fn max_impulse(plan: &ImpulsePlan) -> f64 {
    plan.impulses
        .iter()
        .map(|i| i.delta_v.norm())
        .fold(0.0, f64::max)
}

/// Window-end deferral penalty: sum of |theta_i - theta_i_max| over the first
/// n-1 impulses. The final impulse angle is pinned to its window edge by the
/// optimizer and is excluded.
pub fn uncertainty_cost(angles: &[f64], window_max: &[f64]) -> Result<f64, CostError> {
    if angles.len() != window_max.len() {
        return Err(CostError::LengthMismatch);
    }
    Ok(angles
        .iter()
        .zip(window_max)
        .map(|(t, tmax)| (t - tmax).abs())
        .sum())
}

/// Weighted total of the three cost terms for a built plan.
pub fn total_cost(
    plan: &ImpulsePlan,
    angles: &[f64],
    window_max: &[f64],
    weights: &Weights,
) -> Result<CostBreakdown, CostError> {
    let j_ce = control_effort(plan);
    let j_mi = max_impulse(plan);
    let j_v = uncertainty_cost(angles, window_max)?;
    Ok(CostBreakdown {
        j_ce,
        j_mi,
        j_v,
        total: weights.w_ce * j_ce + weights.w_mi * j_mi + weights.w_v * j_v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maneuver::{CoastArc, Impulse, ImpulsePlan};
    use crate::twobody::StateVector;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn plan_with_magnitudes(mags: &[f64]) -> ImpulsePlan {
        let impulses: Vec<Impulse> = mags
            .iter()
            .enumerate()
            .map(|(k, &m)| Impulse {
                position: Vector3::new(7000.0, 0.0, 0.0),
                epoch: k as f64 * 100.0,
                delta_v: Vector3::new(m, 0.0, 0.0),
            })
            .collect();
        let coast_arcs = (0..mags.len().saturating_sub(1))
            .map(|k| CoastArc {
                initial: StateVector::new(
                    Vector3::new(7000.0, 0.0, 0.0),
                    Vector3::new(0.0, 7.5, 0.0),
                    k as f64 * 100.0,
                ),
                duration: 100.0,
            })
            .collect();
        let total_dv = mags.iter().sum();
        let max_dv = mags.iter().cloned().fold(0.0, f64::max);
        ImpulsePlan { impulses, coast_arcs, total_dv, max_dv }
    }

    #[test]
    fn control_effort_sums_magnitudes() {
        let plan = plan_with_magnitudes(&[0.3, 0.1, 0.2]);
        assert_relative_eq!(control_effort(&plan), 0.6, epsilon = 1e-15);
        assert_relative_eq!(max_impulse(&plan), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn null_plan_costs_zero() {
        let plan = plan_with_magnitudes(&[0.0, 0.0]);
        assert_eq!(control_effort(&plan), 0.0);
        assert_eq!(max_impulse(&plan), 0.0);
    }

    #[test]
    fn uncertainty_cost_examples() {
        assert_eq!(uncertainty_cost(&[0.2, 0.3], &[0.2, 0.3]).unwrap(), 0.0);
        assert_relative_eq!(
            uncertainty_cost(&[0.1, 0.15], &[0.19188, 0.19188]).unwrap(),
            0.13376,
            epsilon = 1e-12
        );
        // single impulse at the window start
        assert_relative_eq!(
            uncertainty_cost(&[-0.19188], &[0.19188]).unwrap(),
            2.0 * 0.19188,
            epsilon = 1e-12
        );
        assert_eq!(
            uncertainty_cost(&[0.1], &[0.1, 0.2]),
            Err(CostError::LengthMismatch)
        );
    }

    #[test]
    fn weighted_totals() {
        let plan = plan_with_magnitudes(&[0.3, 0.1]);
        let b = total_cost(
            &plan,
            &[0.05],
            &[0.19188],
            &Weights { w_ce: 1.0, w_mi: 0.0, w_v: 0.0 },
        )
        .unwrap();
        assert_relative_eq!(b.total, b.j_ce, epsilon = 1e-15);

        let b = total_cost(
            &plan,
            &[0.19188],
            &[0.19188],
            &Weights { w_ce: 0.0, w_mi: 0.0, w_v: 1.0 },
        )
        .unwrap();
        assert_eq!(b.total, 0.0);

        let b = total_cost(
            &plan,
            &[0.05],
            &[0.19188],
            &Weights { w_ce: 1.0, w_mi: 5.0, w_v: 0.0 },
        )
        .unwrap();
        assert_relative_eq!(b.total, b.j_ce + 5.0 * b.j_mi, epsilon = 1e-15);
    }

    #[test]
    fn term_ordering_invariant() {
        let plan = plan_with_magnitudes(&[0.3, 0.1, 0.25, 0.05]);
        let ce = control_effort(&plan);
        let mi = max_impulse(&plan);
        assert!(mi <= ce && ce <= plan.n_impulses() as f64 * mi);
    }

    #[test]
    fn weights_validation() {
        assert!(Weights { w_ce: 1.0, w_mi: 0.0, w_v: 0.0 }.validate().is_ok());
        assert_eq!(
            Weights { w_ce: 0.0, w_mi: 0.0, w_v: 0.0 }.validate(),
            Err(CostError::AllWeightsZero)
        );
        assert_eq!(
            Weights { w_ce: -1.0, w_mi: 0.0, w_v: 1.0 }.validate(),
            Err(CostError::NegativeWeight)
        );
    }

    proptest::proptest! {
        #[test]
        fn total_monotone_in_weights(
            w in 0.1f64..10.0,
            bump in 0.0f64..5.0,
        ) {
            let plan = plan_with_magnitudes(&[0.3, 0.1, 0.2]);
            let angles = [0.05, -0.1];
            let wmax = [0.19, 0.19];
            let base = Weights { w_ce: w, w_mi: w, w_v: w };
            let more = Weights { w_ce: w + bump, w_mi: w, w_v: w };
            let a = total_cost(&plan, &angles, &wmax, &base).unwrap();
            let b = total_cost(&plan, &angles, &wmax, &more).unwrap();
            proptest::prop_assert!(b.total >= a.total);
        }
    }
}
