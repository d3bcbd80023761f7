//! Dual-function grids for contour and line plots.

use serde::{Deserialize, Serialize};
use zfbound::dual::{best_lambda, dual_value};
use zfbound::model::generate_channels_for;
use zfbound::{DualPoint, ScenarioConfig, SetPrecompute};

use crate::BenchError;

/// `theta[i][j]` is `Θ` at `lambdas[i]` and `μ_user = mus[j]`, all other
/// multipliers zero. In profile mode `λ` is re-optimized for every `μ` and
/// `lambdas[j]` records the maximizer, so `theta` has a single row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub user: usize,
    pub profile: bool,
    pub lambdas: Vec<f64>,
    pub mus: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
}

impl ScanGrid {
    /// One `lambda,mu,theta` row per grid point.
    pub fn to_delimited(&self) -> String {
        let mut out = String::from("lambda,mu,theta\n");
        for (i, row) in self.theta.iter().enumerate() {
            for (j, th) in row.iter().enumerate() {
                let lambda = if self.profile { self.lambdas[j] } else { self.lambdas[i] };
                out.push_str(&format!("{lambda:e},{:e},{th:e}\n", self.mus[j]));
            }
        }
        out
    }
}

/// Scans `Θ` on one realization of the base instance. `lambdas = None`
/// selects profile mode. The scanned multiplier belongs to the first
/// real-time user, or user 0 without one.
pub fn scan_dual(
    config: &ScenarioConfig,
    realization: u64,
    lambdas: Option<&[f64]>,
    mus: &[f64],
) -> Result<ScanGrid, BenchError> {
    config.validate().map_err(|e| BenchError::Config(e.to_string()))?;
    let grid_ok = |v: &[f64]| !v.is_empty() && v.iter().all(|x| x.is_finite() && *x >= 0.0);
    if !grid_ok(mus) || lambdas.is_some_and(|l| !grid_ok(l) || l.iter().any(|&x| x <= 0.0)) {
        return Err(BenchError::Config("scan grids must be non-empty; lambda > 0, mu >= 0".into()));
    }
    let inst = config.instance.to_instance()?;
    let channels = generate_channels_for(&config.instance, config.seed, realization)?;
    let pre = SetPrecompute::build(&channels)?;
    let user = inst.rt_users().first().copied().unwrap_or(0);
    let mu_vec = |m: f64| -> Vec<f64> {
        let mut v = vec![0.0; inst.num_users()];
        v[user] = m;
        v
    };

    match lambdas {
        Some(ls) => {
            let theta = ls
                .iter()
                .map(|&l| {
                    mus.iter()
                        .map(|&m| dual_value(&DualPoint { lambda: l, mu: mu_vec(m) }, &pre, &inst))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ScanGrid {
                user,
                profile: false,
                lambdas: ls.to_vec(),
                mus: mus.to_vec(),
                theta,
            })
        }
        None => {
            let mut row = Vec::with_capacity(mus.len());
            let mut best = Vec::with_capacity(mus.len());
            for &m in mus {
                let mu = mu_vec(m);
                let l = best_lambda(&mu, &pre, &inst, &config.solver)?;
                row.push(dual_value(&DualPoint { lambda: l, mu }, &pre, &inst)?);
                best.push(l);
            }
            Ok(ScanGrid {
                user,
                profile: true,
                lambdas: best,
                mus: mus.to_vec(),
                theta: vec![row],
            })
        }
    }
}
