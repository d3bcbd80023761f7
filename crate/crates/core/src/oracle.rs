//! Exhaustive search over SDMA assignments for small instances.
//!
//! Every combination of one usable set per carrier is given the exact
//! fixed-assignment power allocation; the best feasible one wins. This is
//! exact within the zero-forcing, pseudo-inverse beamforming model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dual::{fixed_allocation, DualParams};
use crate::error::{Error, Result};
use crate::model::{Allocation, ProblemInstance};
use crate::precompute::SetPrecompute;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleParams {
    pub enabled: bool,
    pub assignment_budget: u64,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            enabled: false,
            assignment_budget: 1_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub allocation: Option<Allocation>,
    pub assignments: u64,
}

/// Number of assignment vectors, as a float to survive overflow.
pub fn assignment_count(pre: &SetPrecompute) -> f64 {
    (0..pre.num_carriers())
        .map(|n| pre.usable_count(n).max(1) as f64)
        .product()
}

pub fn exact_enumeration(
    inst: &ProblemInstance,
    pre: &SetPrecompute,
    solver: &DualParams,
    assignment_budget: u64,
) -> Result<OracleOutcome> {
    let needed = assignment_count(pre);
    if needed > assignment_budget as f64 {
        return Err(Error::BudgetExceeded {
            needed,
            budget: assignment_budget,
        });
    }
    let options: Vec<Vec<Option<usize>>> = (0..pre.num_carriers())
        .map(|n| {
            let usable: Vec<Option<usize>> = (0..pre.num_sets()).filter(|&s| pre.is_usable(n, s)).map(Some).collect();
            if usable.is_empty() {
                vec![None]
            } else {
                usable
            }
        })
        .collect();
    let total = needed as u64;

    // Index i decodes with carrier 0 as the most significant digit, so the
    // enumeration order is lexicographic in the per-carrier set indices.
    let decode = |mut i: u64| -> Vec<Option<usize>> {
        let mut out = vec![None; options.len()];
        for n in (0..options.len()).rev() {
            let base = options[n].len() as u64;
            out[n] = options[n][(i % base) as usize];
            i /= base;
        }
        out
    };

    let best = (0..total)
        .into_par_iter()
        .map(|i| -> Result<Option<(u64, Allocation)>> {
            let a = fixed_allocation(&decode(i), inst, pre, solver)?.allocation;
            Ok(a.is_feasible().then_some((i, a)))
        })
        .try_reduce(
            || None,
            |a, b| {
                Ok(match (a, b) {
                    (None, x) | (x, None) => x,
                    (Some(x), Some(y)) => {
                        let take_y = y.1.objective > x.1.objective || (y.1.objective == x.1.objective && y.0 < x.0);
                        Some(if take_y { y } else { x })
                    }
                })
            },
        )?;
    Ok(OracleOutcome {
        allocation: best.map(|(_, a)| a),
        assignments: total,
    })
}
