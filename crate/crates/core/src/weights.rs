//! Weight-adjustment baseline.
//!
//! Rate constraints are dropped and the weights of real-time users that fall
//! short are inflated by `ε (d_k - r_k)` until every target is met. The
//! inflated weights only steer the search: the returned allocation is scored
//! under the original weights.

use serde::{Deserialize, Serialize};

use crate::dual::{solve_dual_from, DualParams, DualPoint};
use crate::error::{invalid, Result};
use crate::model::{Allocation, ProblemInstance};
use crate::precompute::SetPrecompute;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightParams {
    pub epsilon: f64,
    pub max_iterations: usize,
}

impl Default for WeightParams {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            max_iterations: 50,
        }
    }
}

impl WeightParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(invalid("weights.epsilon must be in (0, 1]"));
        }
        if self.max_iterations == 0 {
            return Err(invalid("weights.max_iterations must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct WeightOutcome {
    /// Feasible allocation, scored under the original weights.
    pub allocation: Option<Allocation>,
    /// Weights `c'` after the last update.
    pub weights: Vec<f64>,
    pub iterations: usize,
    /// Total subgradient iterations over all inner solves.
    pub inner_iterations: usize,
}

pub fn weight_adjust(
    inst: &ProblemInstance,
    pre: &SetPrecompute,
    params: &WeightParams,
    solver: &DualParams,
) -> Result<WeightOutcome> {
    params.validate()?;
    let relaxed = inst.without_rate_constraints();
    let rt = inst.rt_users();
    let slack = 1.0 - solver.tolerances.rate;
    let mut weights = inst.weights().to_vec();
    let mut warm: Option<DualPoint> = None;
    let mut inner_iterations = 0;

    for i in 1..=params.max_iterations {
        let scaled = relaxed.clone().with_weights(weights.clone())?;
        let sol = solve_dual_from(&scaled, pre, solver, warm.as_ref())?;
        inner_iterations += sol.iterations;
        let cand = &sol.best_eval.candidate;
        let short: Vec<usize> = rt
            .iter()
            .copied()
            .filter(|&k| cand.user_rates[k] < inst.min_rate(k) * slack)
            .collect();
        if short.is_empty() {
            let allocation = Allocation::from_beams(
                inst,
                pre.channels(),
                cand.assignment.clone(),
                cand.powers.clone(),
                cand.beams.clone(),
                &solver.tolerances,
            )?;
            let allocation = allocation.is_feasible().then_some(allocation);
            return Ok(WeightOutcome {
                allocation,
                weights,
                iterations: i,
                inner_iterations,
            });
        }
        for &k in &short {
            weights[k] += params.epsilon * (inst.min_rate(k) - cand.user_rates[k]);
        }
        warm = Some(sol.best_point.clone());
    }
    Ok(WeightOutcome {
        allocation: None,
        weights,
        iterations: params.max_iterations,
        inner_iterations,
    })
}
