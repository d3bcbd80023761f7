//! Monte Carlo runs over sweep points and channel realizations.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use zfbound::dual::{solve_dual, TraceRecord};
use zfbound::model::{generate_channels_for, InstanceConfig};
use zfbound::oracle::{assignment_count, exact_enumeration};
use zfbound::{gap_percent, recover_feasible, weight_adjust, Allocation, ScenarioConfig, SetPrecompute};

use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DualBound,
    Recovery,
    WeightAdjust,
    Oracle,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::DualBound, Method::Recovery, Method::WeightAdjust, Method::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            Method::DualBound => "dual_bound",
            Method::Recovery => "recovery",
            Method::WeightAdjust => "weight_adjust",
            Method::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Feasible,
    NotFound,
    TimedOut,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub status: Status,
    pub objective: Option<f64>,
    pub gap_percent: Option<f64>,
    pub iterations: usize,
    pub wall_ms: f64,
}

impl MethodResult {
    fn skipped(status: Status) -> Self {
        Self {
            status,
            objective: None,
            gap_percent: None,
            iterations: 0,
            wall_ms: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub sweep_value: Option<f64>,
    pub realization: u64,
    pub upper_bound: f64,
    pub dual_converged: bool,
    pub dual: MethodResult,
    pub recovery: MethodResult,
    pub weight_adjust: MethodResult,
    pub oracle: MethodResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceRecord>>,
    /// Feasible allocations, kept only on request.
    #[serde(skip)]
    pub allocations: Vec<(Method, Allocation)>,
}

impl RealizationRecord {
    pub fn result(&self, method: Method) -> &MethodResult {
        match method {
            Method::DualBound => &self.dual,
            Method::Recovery => &self.recovery,
            Method::WeightAdjust => &self.weight_adjust,
            Method::Oracle => &self.oracle,
        }
    }
}

/// Means over the realizations where the method succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub sweep_value: Option<f64>,
    pub method: Method,
    pub mean_objective: Option<f64>,
    pub mean_gap_percent: Option<f64>,
    pub feasible_count: usize,
    pub timed_out_count: usize,
    pub mean_iterations: Option<f64>,
    pub mean_wall_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub sweep_parameter: Option<String>,
    pub records: Vec<RealizationRecord>,
    pub aggregates: Vec<Aggregate>,
}

impl RunReport {
    pub fn aggregate(&self, sweep_value: Option<f64>, method: Method) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.sweep_value == sweep_value && a.method == method)
    }

    pub fn records_at(&self, sweep_value: Option<f64>) -> impl Iterator<Item = &RealizationRecord> {
        self.records.iter().filter(move |r| r.sweep_value == sweep_value)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    pub emit_trace: bool,
    pub keep_allocations: bool,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn aggregate(records: &[RealizationRecord], sweep_values: &[Option<f64>]) -> Vec<Aggregate> {
    let mut out = Vec::new();
    for &sv in sweep_values {
        let at: Vec<&RealizationRecord> = records.iter().filter(|r| r.sweep_value == sv).collect();
        for method in Method::ALL {
            let ok: Vec<&MethodResult> = at
                .iter()
                .map(|r| r.result(method))
                .filter(|m| m.status == Status::Feasible)
                .collect();
            out.push(Aggregate {
                sweep_value: sv,
                method,
                mean_objective: mean(ok.iter().filter_map(|m| m.objective)),
                mean_gap_percent: mean(ok.iter().filter_map(|m| m.gap_percent)),
                feasible_count: ok.len(),
                timed_out_count: at.iter().filter(|r| r.result(method).status == Status::TimedOut).count(),
                mean_iterations: mean(ok.iter().map(|m| m.iterations as f64)),
                mean_wall_ms: mean(ok.iter().map(|m| m.wall_ms)),
            });
        }
    }
    out
}

/// Runs every method on one realization of one sweep point.
pub fn run_realization(
    config: &ScenarioConfig,
    instance: &InstanceConfig,
    sweep_value: Option<f64>,
    realization: u64,
    options: &RunOptions,
) -> Result<RealizationRecord, BenchError> {
    let start = Instant::now();
    let deadline = config.timeout_secs * 1e3;
    let elapsed_ms = || start.elapsed().as_secs_f64() * 1e3;

    let inst = instance.to_instance()?;
    let channels = generate_channels_for(instance, config.seed, realization)?;
    let pre = SetPrecompute::build(&channels)?;

    let t = Instant::now();
    let dsol = solve_dual(&inst, &pre, &config.solver)?;
    let upper = dsol.upper_bound;
    let dual = MethodResult {
        status: Status::Feasible,
        objective: Some(upper),
        gap_percent: None,
        iterations: dsol.iterations,
        wall_ms: t.elapsed().as_secs_f64() * 1e3,
    };
    let mut allocations = Vec::new();
    let mut finish = |method: Method, alloc: Option<Allocation>, iterations: usize, t: Instant| -> Result<MethodResult, BenchError> {
        let wall_ms = t.elapsed().as_secs_f64() * 1e3;
        let Some(a) = alloc else {
            return Ok(MethodResult {
                status: Status::NotFound,
                objective: None,
                gap_percent: None,
                iterations,
                wall_ms,
            });
        };
        let objective = a.objective;
        let gap = if upper > 0.0 { Some(gap_percent(upper, objective)?) } else { None };
        if options.keep_allocations {
            allocations.push((method, a));
        }
        Ok(MethodResult {
            status: Status::Feasible,
            objective: Some(objective),
            gap_percent: gap,
            iterations,
            wall_ms,
        })
    };

    let recovery = if elapsed_ms() > deadline {
        MethodResult::skipped(Status::TimedOut)
    } else {
        let t = Instant::now();
        let out = recover_feasible(&dsol, &inst, &pre, &config.recovery, &config.solver)?;
        finish(Method::Recovery, out.allocation, out.outer_iterations, t)?
    };
    let weight_adjust = if elapsed_ms() > deadline {
        MethodResult::skipped(Status::TimedOut)
    } else {
        let t = Instant::now();
        let out = weight_adjust(&inst, &pre, &config.weights, &config.solver)?;
        finish(Method::WeightAdjust, out.allocation, out.iterations, t)?
    };
    let oracle = if !config.oracle.enabled || assignment_count(&pre) > config.oracle.assignment_budget as f64 {
        MethodResult::skipped(Status::Skipped)
    } else if elapsed_ms() > deadline {
        MethodResult::skipped(Status::TimedOut)
    } else {
        let t = Instant::now();
        let out = exact_enumeration(&inst, &pre, &config.solver, config.oracle.assignment_budget)?;
        finish(Method::Oracle, out.allocation, out.assignments as usize, t)?
    };

    Ok(RealizationRecord {
        sweep_value,
        realization,
        upper_bound: upper,
        dual_converged: dsol.converged,
        dual,
        recovery,
        weight_adjust,
        oracle,
        trace: options.emit_trace.then_some(dsol.trace),
        allocations,
    })
}

pub fn run_scenario(config: &ScenarioConfig, options: &RunOptions) -> Result<RunReport, BenchError> {
    config.validate().map_err(|e| BenchError::Config(e.to_string()))?;
    let points = config.sweep_points().map_err(|e| BenchError::Config(e.to_string()))?;
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| (0..config.realizations as u64).map(move |r| (p, r)))
        .collect();
    let work = || -> Result<Vec<RealizationRecord>, BenchError> {
        jobs.par_iter()
            .map(|&(p, r)| run_realization(config, &points[p].1, points[p].0, r, options))
            .collect()
    };
    let records = match options.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| BenchError::Config(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let sweep_values: Vec<Option<f64>> = points.iter().map(|p| p.0).collect();
    Ok(RunReport {
        config: config.clone(),
        sweep_parameter: config.sweep.as_ref().map(|s| s.parameter.name().to_string()),
        aggregates: aggregate(&records, &sweep_values),
        records,
    })
}
