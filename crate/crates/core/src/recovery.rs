//! Primal recovery from a dual solution.
//!
//! The dual candidate is tried first, then the exact power allocation on the
//! dual-optimal assignment. Where carriers are tied at the dual optimum every
//! tied assignment (up to a cap) is tried and the best feasible one kept.
//! Failing both, the rate multipliers of users that
//! miss their target are raised step by step at fixed `λ*`, and every new
//! per-carrier assignment this uncovers gets its own power allocation.

use serde::{Deserialize, Serialize};

use crate::dual::{argmin_sets, fixed_allocation, near_argmin_sets, DualParams, DualPoint, DualSolution};
use crate::error::{invalid, Result};
use crate::model::{Allocation, ProblemInstance};
use crate::precompute::SetPrecompute;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoveryParams {
    /// `μ` increment as a multiple of `max_k c_k`.
    pub mu_step_factor: f64,
    pub max_outer: usize,
    /// Tie tolerance for the dual-optimal sets, relative to `|Θ|` and spread
    /// over the carriers.
    pub tie_tol: f64,
    pub max_tied_assignments: usize,
}

impl Default for RecoveryParams {
    fn default() -> Self {
        Self {
            mu_step_factor: 0.05,
            max_outer: 200,
            tie_tol: 1e-4,
            max_tied_assignments: 64,
        }
    }
}

impl RecoveryParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_step_factor > 0.0 && self.mu_step_factor.is_finite()) {
            return Err(invalid("recovery.mu_step_factor must be positive"));
        }
        if !(self.tie_tol >= 0.0) || self.max_tied_assignments == 0 {
            return Err(invalid("recovery.tie_tol must be >= 0 and max_tied_assignments >= 1"));
        }
        if self.max_outer == 0 {
            return Err(invalid("recovery.max_outer must be >= 1"));
        }
        Ok(())
    }
}

/// Which step produced the returned allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryStage {
    DualCandidate,
    FixedAssignment,
    Perturbation,
    NotFound,
}

#[derive(Debug, Clone)]
pub struct RecoveryOutcome {
    pub allocation: Option<Allocation>,
    pub stage: RecoveryStage,
    /// `μ` increments performed.
    pub outer_iterations: usize,
    /// Fixed-assignment power allocations solved.
    pub assignments_tried: usize,
}

pub fn recover_feasible(
    dsol: &DualSolution,
    inst: &ProblemInstance,
    pre: &SetPrecompute,
    params: &RecoveryParams,
    solver: &DualParams,
) -> Result<RecoveryOutcome> {
    params.validate()?;
    let eval = &dsol.best_eval;
    if !pre.channels().matches(inst)
        || eval.chosen_sets.len() != inst.num_subcarriers()
        || dsol.best_point.mu.len() != inst.num_users()
    {
        return Err(invalid("dual solution does not match the instance"));
    }
    let done = |allocation: Allocation, stage, outer, tried| RecoveryOutcome {
        allocation: Some(allocation),
        stage,
        outer_iterations: outer,
        assignments_tried: tried,
    };

    let candidate = dsol
        .best_feasible
        .as_ref()
        .map(|e| &e.candidate)
        .filter(|c| c.is_feasible())
        .or(Some(&eval.candidate).filter(|c| c.is_feasible()));
    if let Some(c) = candidate {
        return Ok(done(c.clone(), RecoveryStage::DualCandidate, 0, 0));
    }

    let mut assignment = eval.chosen_sets.clone();
    let mut latest = fixed_allocation(&assignment, inst, pre, solver)?.allocation;
    let mut tried = 1;
    let mut best = latest.is_feasible().then(|| latest.clone());
    let tau = params.tie_tol * dsol.best_theta.abs().max(1.0) / inst.num_subcarriers() as f64;
    let near = near_argmin_sets(&dsol.best_point, pre, inst, tau)?;
    for alt in tied_assignments(&near, params.max_tied_assignments) {
        if alt == assignment {
            continue;
        }
        let a = fixed_allocation(&alt, inst, pre, solver)?.allocation;
        tried += 1;
        if a.is_feasible() && best.as_ref().is_none_or(|b| a.objective > b.objective) {
            best = Some(a);
        }
    }
    if let Some(b) = best {
        return Ok(done(b, RecoveryStage::FixedAssignment, 0, tried));
    }

    let step = params.mu_step_factor * inst.max_weight();
    let slack = 1.0 - solver.tolerances.rate;
    let mut point = DualPoint {
        lambda: dsol.best_point.lambda,
        mu: dsol.best_point.mu.clone(),
    };
    let mut outer = 0;
    for j in 1..=params.max_outer {
        outer = j;
        let needy: Vec<usize> = inst
            .rt_users()
            .into_iter()
            .filter(|&k| latest.user_rates[k] < inst.min_rate(k) * slack)
            .collect();
        if needy.is_empty() {
            break;
        }
        for &k in &needy {
            point.mu[k] += step;
        }
        let next = argmin_sets(&point, pre, inst)?;
        if next != assignment {
            assignment = next;
            latest = fixed_allocation(&assignment, inst, pre, solver)?.allocation;
            tried += 1;
            if latest.is_feasible() {
                return Ok(done(latest, RecoveryStage::Perturbation, j, tried));
            }
        }
    }
    Ok(RecoveryOutcome {
        allocation: None,
        stage: RecoveryStage::NotFound,
        outer_iterations: outer,
        assignments_tried: tried,
    })
}

/// Assignments picking one listed set per carrier, in odometer order with
/// the first carrier slowest, at most `cap` of them.
fn tied_assignments(near: &[Vec<usize>], cap: usize) -> Vec<Vec<Option<usize>>> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; near.len()];
    loop {
        out.push(near.iter().zip(&idx).map(|(opts, &i)| opts.get(i).copied()).collect());
        if out.len() >= cap {
            break;
        }
        let mut n = near.len();
        loop {
            if n == 0 {
                return out;
            }
            n -= 1;
            idx[n] += 1;
            if idx[n] < near[n].len().max(1) {
                break;
            }
            idx[n] = 0;
        }
    }
    out
}

/// Relative gap in percent between an upper bound and a primal value.
pub fn gap_percent(upper: f64, value: f64) -> Result<f64> {
    if !(upper > 0.0 && upper.is_finite()) || !value.is_finite() {
        return Err(invalid(format!("gap needs a positive finite upper bound, got {upper}")));
    }
    Ok(100.0 * (upper - value) / upper)
}
