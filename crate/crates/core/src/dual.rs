//! Lagrangian dual of the zero-forcing allocation problem.
//!
//! Power and minimum-rate constraints are dualized with multipliers `λ` and
//! `μ_k`. For fixed multipliers the Lagrangian separates per subcarrier; on
//! each carrier we pick the SDMA set minimizing
//!
//! ```text
//! f_{n,s} = -Σ_{k∈s} [ c'_k log2(1 + p_k) - λ γ²_k p_k ],   c'_k = c_k + μ_k
//! ```
//!
//! with `p_k` the closed-form per-user power. The dual value is
//! `Θ = -λ P + Σ_k μ_k d_k + Σ_n min_s f_{n,s}` and `-Θ` bounds the primal
//! optimum from above for every `λ > 0, μ ≥ 0`.
//!
//! The dual is maximized by projected subgradient ascent over `μ`. For each
//! `μ` the power multiplier is either placed exactly at the maximizer of
//! `Θ(·, μ)` (a monotone root-find on the power subgradient) or stepped like
//! the other multipliers.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{Allocation, FeasibilityTolerances, ProblemInstance};
use crate::numerics::ComplexVector;
use crate::precompute::SetPrecompute;

/// Multipliers: `lambda` for the power budget, `mu[k]` for user `k`'s rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPoint {
    pub lambda: f64,
    pub mu: Vec<f64>,
}

impl DualPoint {
    pub fn new(lambda: f64, mu: Vec<f64>) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) || mu.iter().any(|&m| !(m >= 0.0 && m.is_finite())) {
            return Err(invalid("multipliers must be finite and non-negative"));
        }
        Ok(Self { lambda, mu })
    }

    /// Effective weights `c_k + μ_k`.
    pub fn effective_weights(&self, inst: &ProblemInstance) -> Vec<f64> {
        inst.weights().iter().zip(&self.mu).map(|(c, m)| c + m).collect()
    }
}

/// How the power multiplier moves between iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    /// Maximize `Θ(·, μ)` exactly for the current `μ`.
    Exact,
    /// Projected subgradient step, like the rate multipliers.
    Subgradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Constant step `δ`.
    Fixed,
    /// `δ / |ĝ|`.
    Normalized,
    /// `δ / sqrt(i)`.
    Diminishing,
    /// Per-coordinate `δ · s_j`: `s_j` halves when the coordinate's
    /// subgradient changes sign and grows by 20% (up to 4) while it keeps it.
    Adaptive,
}

/// Subgradient solver settings.
///
/// Steps act on constraint-normalized residuals: the power residual is
/// divided by the budget and each rate residual by its minimum rate, then
/// multiplied by the natural scale of the multiplier (`λ⁰` for power,
/// `max_k c_k` for rates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualParams {
    pub step: f64,
    pub step_rule: StepRule,
    pub lambda_rule: LambdaRule,
    /// Relative primal violation accepted at termination.
    pub eps_feas: f64,
    /// Absolute complementarity residual `|multiplier · subgradient|`.
    pub eps_comp: f64,
    pub lambda_min: f64,
    /// `μ_max = mu_max_factor · max_k c_k`.
    pub mu_max_factor: f64,
    pub max_iterations: usize,
    /// Optimality slack of the termination certificate, relative to `|Θ|`.
    pub certificate_tol: f64,
    /// Number of recent subgradients kept for the certificate.
    pub bundle_size: usize,
    pub tolerances: FeasibilityTolerances,
}

impl Default for DualParams {
    fn default() -> Self {
        Self {
            step: 0.1,
            step_rule: StepRule::Adaptive,
            lambda_rule: LambdaRule::Exact,
            eps_feas: 1e-3,
            eps_comp: 1e-3,
            lambda_min: 1e-9,
            mu_max_factor: 1e3,
            max_iterations: 2000,
            certificate_tol: 1e-4,
            bundle_size: 40,
            tolerances: FeasibilityTolerances::default(),
        }
    }
}

impl DualParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step", self.step),
            ("eps_feas", self.eps_feas),
            ("eps_comp", self.eps_comp),
            ("lambda_min", self.lambda_min),
            ("mu_max_factor", self.mu_max_factor),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(invalid(format!("solver.{name} must be positive, got {v}")));
        }
        if self.max_iterations == 0 {
            return Err(invalid("solver.max_iterations must be >= 1"));
        }
        if !(self.certificate_tol >= 0.0) {
            return Err(invalid("solver.certificate_tol must be >= 0"));
        }
        Ok(())
    }
}

/// Optimal signal power for one user: `max(0, c'/(λ γ² ln 2) - 1)`.
///
/// This is the exact maximizer of `c' log2(1 + p) - λ γ² p` over `p ≥ 0`.
pub fn user_power(weight: f64, lambda: f64, gamma: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::UnboundedPower(lambda));
    }
    if !(gamma > 0.0 && gamma.is_finite()) || !(weight >= 0.0 && weight.is_finite()) {
        return Err(invalid(format!("need gamma > 0 and weight >= 0, got {gamma}, {weight}")));
    }
    Ok((weight / (lambda * gamma * gamma * LN_2) - 1.0).max(0.0))
}

/// Per-carrier Lagrangian term of set `s`, with the member powers.
pub fn set_score(
    n: usize,
    s: usize,
    point: &DualPoint,
    pre: &SetPrecompute,
    inst: &ProblemInstance,
) -> Result<(f64, Vec<f64>)> {
    if n >= pre.num_carriers() || s >= pre.num_sets() {
        return Err(invalid("carrier or set index out of range"));
    }
    if !pre.is_usable(n, s) {
        return Err(Error::RejectedSet { carrier: n, set: s });
    }
    let mut f = 0.0;
    let mut powers = Vec::with_capacity(pre.set(s).size());
    for (pos, &k) in pre.set(s).members().iter().enumerate() {
        let c = inst.weight(k) + point.mu[k];
        let g2 = pre.gamma_sq(n, s)[pos];
        let p = user_power(c, point.lambda, g2.sqrt())?;
        f -= c * (1.0 + p).log2() - point.lambda * g2 * p;
        powers.push(p);
    }
    Ok((f, powers))
}

/// Dual value, per-carrier argmin sets, subgradients and the primal
/// candidate they define.
#[derive(Debug, Clone)]
pub struct DualEvalResult {
    pub point: DualPoint,
    pub theta: f64,
    /// Minimizing set index per carrier; `None` if no set is usable there.
    pub chosen_sets: Vec<Option<usize>>,
    /// `p[k][n]` at the chosen sets.
    pub powers: Vec<Vec<f64>>,
    pub rates: Vec<Vec<f64>>,
    /// Candidate transmit power minus the budget.
    pub g_lambda: f64,
    /// `d_k - Σ_n r_{k,n}`; zero for users without a rate constraint.
    pub g_mu: Vec<f64>,
    pub candidate: Allocation,
}

/// Aggregate of one evaluation, without the allocation.
#[derive(Debug, Clone)]
struct Summary {
    lambda: f64,
    theta: f64,
    power: f64,
    /// Rate of every user at the chosen sets.
    rates: Vec<f64>,
    /// `Σ c'/ln2` and `Σ γ²` over active members, for the water-level step.
    active_weight: f64,
    active_gamma_sq: f64,
    chosen: Vec<Option<usize>>,
}

/// Hot-loop evaluator over all carriers and sets.
struct Evaluator<'a> {
    pre: &'a SetPrecompute,
    inst: &'a ProblemInstance,
    /// Smallest usable `γ²` per user, for the zero-power bracket.
    min_gamma_sq: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(pre: &'a SetPrecompute, inst: &'a ProblemInstance) -> Self {
        let mut min_gamma_sq = vec![f64::INFINITY; inst.num_users()];
        let members = pre.flat_members();
        for n in 0..pre.num_carriers() {
            let g2 = pre.carrier_gamma_sq(n);
            let usable = pre.carrier_usable(n);
            for s in 0..pre.num_sets() {
                if !usable[s] {
                    continue;
                }
                for t in pre.member_range(s) {
                    let k = members[t];
                    min_gamma_sq[k] = min_gamma_sq[k].min(g2[t]);
                }
            }
        }
        Self {
            pre,
            inst,
            min_gamma_sq,
        }
    }

    /// Power multiplier above which every user gets zero power.
    fn lambda_zero_power(&self, weights: &[f64]) -> f64 {
        weights
            .iter()
            .zip(&self.min_gamma_sq)
            .filter(|(_, g)| g.is_finite())
            .map(|(c, g)| c / (g * LN_2))
            .fold(0.0, f64::max)
    }

    fn summarize(&self, lambda: f64, mu: &[f64], weights: &[f64]) -> Summary {
        let pre = self.pre;
        let inst = self.inst;
        let users = inst.num_users();
        // A member is active iff log2(c'/(λ ln2)) > log2 γ²; its rate is the
        // difference and its transmit power is c'/(λ ln2) - γ².
        let level: Vec<f64> = weights.iter().map(|c| c / (lambda * LN_2)).collect();
        let log_level: Vec<f64> = level.iter().map(|l| l.log2()).collect();
        let const_term: Vec<f64> = weights.iter().map(|c| c / LN_2).collect();
        let members = pre.flat_members();

        let mut sum_f = 0.0;
        let mut power = 0.0;
        let mut rates = vec![0.0; users];
        let mut active_weight = 0.0;
        let mut active_gamma_sq = 0.0;
        let mut chosen = Vec::with_capacity(pre.num_carriers());

        for n in 0..pre.num_carriers() {
            let g2 = pre.carrier_gamma_sq(n);
            let lg2 = pre.carrier_log2_gamma_sq(n);
            let usable = pre.carrier_usable(n);
            let mut best_f = f64::INFINITY;
            let mut best_s = None;
            for s in 0..pre.num_sets() {
                if !usable[s] {
                    continue;
                }
                let mut f = 0.0;
                for t in pre.member_range(s) {
                    let k = members[t];
                    let excess = log_level[k] - lg2[t];
                    if excess > 0.0 {
                        f += -weights[k] * excess + const_term[k] - lambda * g2[t];
                    }
                }
                if f < best_f {
                    best_f = f;
                    best_s = Some(s);
                }
            }
            if let Some(s) = best_s {
                sum_f += best_f;
                for t in pre.member_range(s) {
                    let k = members[t];
                    let excess = log_level[k] - lg2[t];
                    if excess > 0.0 {
                        power += level[k] - g2[t];
                        rates[k] += excess;
                        active_weight += const_term[k];
                        active_gamma_sq += g2[t];
                    }
                }
            }
            chosen.push(best_s);
        }
        let rate_term: f64 = mu.iter().zip(inst.min_rates()).map(|(m, d)| m * d).sum();
        Summary {
            lambda,
            theta: -lambda * inst.power_budget() + rate_term + sum_f,
            power,
            rates,
            active_weight,
            active_gamma_sq,
            chosen,
        }
    }

    /// Maximizes `Θ(·, μ)`: finds where the candidate power crosses the
    /// budget. Returns the evaluations just above (power within budget) and
    /// just below (power over budget) the crossing; they coincide when the
    /// crossing is not at a set switch.
    fn lambda_root(&self, mu: &[f64], weights: &[f64], warm: Option<f64>, lambda_min: f64) -> (Summary, Option<Summary>) {
        let budget = self.inst.power_budget();
        let cap = self.lambda_zero_power(weights);
        if !(cap > lambda_min) {
            // Nobody can ever be given power: Θ is maximized at the floor.
            return (self.summarize(lambda_min, mu, weights), None);
        }
        let floor = self.summarize(lambda_min, mu, weights);
        if floor.power <= budget {
            return (floor, None);
        }
        let mut lo = floor; // power > budget
        let mut hi: Option<Summary> = None; // power <= budget
        let mut hi_lambda = cap * (1.0 + 1e-12);

        let mut next = warm
            .filter(|&l| l > lo.lambda && l < hi_lambda)
            .unwrap_or_else(|| (lo.lambda * hi_lambda).sqrt());
        let mut last_interpolated_side: Option<bool> = None;
        for _ in 0..200 {
            let s = self.summarize(next, mu, weights);
            let over = s.power > budget;
            if (s.power - budget).abs() <= 1e-13 * budget {
                return (s, None);
            }
            if over {
                lo = s;
            } else {
                hi_lambda = s.lambda;
                hi = Some(s);
            }
            if hi_lambda / lo.lambda - 1.0 <= 1e-13 {
                break;
            }
            let cur = if over { &lo } else { hi.as_ref().unwrap() };
            // Water-level step: exact if the active sets do not change.
            let wl = if cur.active_weight > 0.0 {
                cur.active_weight / (budget + cur.active_gamma_sq)
            } else {
                f64::NAN
            };
            let interior = wl > lo.lambda && wl < hi_lambda;
            let repeat = last_interpolated_side == Some(over);
            if interior && !repeat {
                next = wl;
                last_interpolated_side = Some(over);
            } else {
                next = (lo.lambda * hi_lambda).sqrt();
                last_interpolated_side = None;
            }
        }
        match hi {
            Some(h) => (h, Some(lo)),
            None => (self.summarize(hi_lambda, mu, weights), Some(lo)),
        }
    }

    /// Lagrangian term of every set on carrier `n` (`∞` when unusable).
    fn carrier_scores(&self, n: usize, lambda: f64, weights: &[f64], log_level: &[f64], scores: &mut [f64]) {
        let pre = self.pre;
        let members = pre.flat_members();
        let g2 = pre.carrier_gamma_sq(n);
        let lg2 = pre.carrier_log2_gamma_sq(n);
        let usable = pre.carrier_usable(n);
        for (s, score) in scores.iter_mut().enumerate() {
            *score = if usable[s] {
                pre.member_range(s)
                    .filter_map(|t| {
                        let k = members[t];
                        let excess = log_level[k] - lg2[t];
                        (excess > 0.0).then(|| -weights[k] * excess + weights[k] / LN_2 - lambda * g2[t])
                    })
                    .sum()
            } else {
                f64::INFINITY
            };
        }
    }

    /// Per carrier, the sets within `tau` of the minimum, best first.
    fn near_argmin(&self, lambda: f64, weights: &[f64], tau: f64) -> Vec<Vec<usize>> {
        let log_level: Vec<f64> = weights.iter().map(|c| (c / (lambda * LN_2)).log2()).collect();
        let mut scores = vec![f64::INFINITY; self.pre.num_sets()];
        (0..self.pre.num_carriers())
            .map(|n| {
                self.carrier_scores(n, lambda, weights, &log_level, &mut scores);
                let best = scores.iter().cloned().fold(f64::INFINITY, f64::min);
                let mut near: Vec<usize> = (0..scores.len()).filter(|&s| scores[s] <= best + tau).collect();
                near.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
                near
            })
            .collect()
    }

    /// Per carrier, the signed contributions `[power, -rate_rt0, ...]` of
    /// every set within `tau` of the carrier minimum. Any per-carrier choice
    /// among them gives a `(N tau)`-subgradient at `(λ, μ)`.
    fn tied_options(&self, lambda: f64, weights: &[f64], rt: &[usize], tau: f64) -> Vec<Vec<Vec<f64>>> {
        let pre = self.pre;
        let mut rt_pos = vec![None; self.inst.num_users()];
        for (j, &k) in rt.iter().enumerate() {
            rt_pos[k] = Some(j);
        }
        let level: Vec<f64> = weights.iter().map(|c| c / (lambda * LN_2)).collect();
        let log_level: Vec<f64> = level.iter().map(|l| l.log2()).collect();
        let members = pre.flat_members();
        let mut scores = vec![f64::INFINITY; pre.num_sets()];
        (0..pre.num_carriers())
            .map(|n| {
                let lg2 = pre.carrier_log2_gamma_sq(n);
                let g2 = pre.carrier_gamma_sq(n);
                self.carrier_scores(n, lambda, weights, &log_level, &mut scores);
                let best = scores.iter().cloned().fold(f64::INFINITY, f64::min);
                if !best.is_finite() {
                    return vec![vec![0.0; rt.len() + 1]];
                }
                (0..pre.num_sets())
                    .filter(|&s| scores[s] <= best + tau)
                    .map(|s| {
                        let mut v = vec![0.0; rt.len() + 1];
                        for t in pre.member_range(s) {
                            let k = members[t];
                            let excess = log_level[k] - lg2[t];
                            if excess > 0.0 {
                                v[0] += level[k] - g2[t];
                                if let Some(j) = rt_pos[k] {
                                    v[j + 1] -= excess;
                                }
                            }
                        }
                        v
                    })
                    .collect()
            })
            .collect()
    }

    fn full_eval(&self, summary: &Summary, mu: &[f64], tol: &FeasibilityTolerances) -> Result<DualEvalResult> {
        let inst = self.inst;
        let pre = self.pre;
        let (users, carriers, m) = (inst.num_users(), inst.num_subcarriers(), inst.num_antennas());
        let point = DualPoint {
            lambda: summary.lambda,
            mu: mu.to_vec(),
        };
        let weights = point.effective_weights(inst);
        let mut powers = vec![vec![0.0; carriers]; users];
        let mut beams = vec![vec![ComplexVector::zeros(m); carriers]; users];
        let mut assignment = vec![Vec::new(); carriers];
        for (n, choice) in summary.chosen.iter().enumerate() {
            let Some(s) = *choice else { continue };
            for (pos, &k) in pre.set(s).members().iter().enumerate() {
                let g2 = pre.gamma_sq(n, s)[pos];
                let p = user_power(weights[k], point.lambda, g2.sqrt())?;
                if p > 0.0 {
                    powers[k][n] = p;
                    beams[k][n] = pre.direction(n, s, pos).scaled(p.sqrt());
                    assignment[n].push(k);
                }
            }
        }
        let candidate = Allocation::from_beams(inst, pre.channels(), assignment, powers.clone(), beams, tol)?;
        let g_mu = (0..users)
            .map(|k| {
                if inst.is_real_time(k) {
                    inst.min_rate(k) - summary.rates[k]
                } else {
                    0.0
                }
            })
            .collect();
        Ok(DualEvalResult {
            point,
            theta: summary.theta,
            chosen_sets: summary.chosen.clone(),
            powers,
            rates: candidate.rates.clone(),
            g_lambda: summary.power - inst.power_budget(),
            g_mu,
            candidate,
        })
    }
}

fn check_inputs(pre: &SetPrecompute, inst: &ProblemInstance) -> Result<()> {
    if !pre.channels().matches(inst) {
        return Err(invalid("precompute was built for different dimensions"));
    }
    Ok(())
}

fn check_point(point: &DualPoint, inst: &ProblemInstance) -> Result<()> {
    if point.mu.len() != inst.num_users() {
        return Err(invalid("mu needs one entry per user"));
    }
    if !(point.lambda > 0.0) {
        return Err(Error::UnboundedPower(point.lambda));
    }
    if point.mu.iter().any(|&m| !(m >= 0.0 && m.is_finite())) {
        return Err(invalid("mu must be finite and non-negative"));
    }
    Ok(())
}

/// Evaluates `Θ(λ, μ)` and the primal candidate at `point`.
pub fn eval_dual(point: &DualPoint, pre: &SetPrecompute, inst: &ProblemInstance) -> Result<DualEvalResult> {
    eval_dual_with(point, pre, inst, &FeasibilityTolerances::default())
}

pub fn eval_dual_with(
    point: &DualPoint,
    pre: &SetPrecompute,
    inst: &ProblemInstance,
    tol: &FeasibilityTolerances,
) -> Result<DualEvalResult> {
    check_inputs(pre, inst)?;
    check_point(point, inst)?;
    let ev = Evaluator::new(pre, inst);
    let weights = point.effective_weights(inst);
    let summary = ev.summarize(point.lambda, &point.mu, &weights);
    ev.full_eval(&summary, &point.mu, tol)
}

/// Dual value only; cheaper than [`eval_dual`] since no allocation is built.
pub fn dual_value(point: &DualPoint, pre: &SetPrecompute, inst: &ProblemInstance) -> Result<f64> {
    check_inputs(pre, inst)?;
    check_point(point, inst)?;
    let ev = Evaluator::new(pre, inst);
    Ok(ev.summarize(point.lambda, &point.mu, &point.effective_weights(inst)).theta)
}

/// Per-carrier minimizing sets at `point` (ties go to the lexicographically
/// smallest member list).
pub fn argmin_sets(point: &DualPoint, pre: &SetPrecompute, inst: &ProblemInstance) -> Result<Vec<Option<usize>>> {
    check_inputs(pre, inst)?;
    check_point(point, inst)?;
    let ev = Evaluator::new(pre, inst);
    Ok(ev.summarize(point.lambda, &point.mu, &point.effective_weights(inst)).chosen)
}

/// Per carrier, every set whose Lagrangian term is within `tau` of the
/// minimum at `point`, best first. Empty for carriers without usable sets.
pub fn near_argmin_sets(point: &DualPoint, pre: &SetPrecompute, inst: &ProblemInstance, tau: f64) -> Result<Vec<Vec<usize>>> {
    check_inputs(pre, inst)?;
    check_point(point, inst)?;
    if !(tau >= 0.0) {
        return Err(invalid("tie tolerance must be >= 0"));
    }
    Ok(Evaluator::new(pre, inst).near_argmin(point.lambda, &point.effective_weights(inst), tau))
}

/// The `λ ≥ λ_min` maximizing `Θ(·, μ)` for fixed `μ`.
pub fn best_lambda(mu: &[f64], pre: &SetPrecompute, inst: &ProblemInstance, params: &DualParams) -> Result<f64> {
    check_inputs(pre, inst)?;
    let point = DualPoint::new(1.0, mu.to_vec())?;
    check_point(&point, inst)?;
    let ev = Evaluator::new(pre, inst);
    let (hi, _) = ev.lambda_root(mu, &point.effective_weights(inst), None, params.lambda_min);
    Ok(hi.lambda)
}

/// One row of the per-iteration trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub theta: f64,
    pub lambda: f64,
    /// `μ` of the real-time users, in ascending user order.
    pub mu: Vec<f64>,
    pub g_lambda: f64,
    pub g_mu_norm: f64,
    pub power: f64,
    /// Candidate rates of the real-time users.
    pub rt_rates: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    pub best_point: DualPoint,
    pub best_theta: f64,
    /// `-Θ` at the best iterate.
    pub upper_bound: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceRecord>,
    /// Evaluation at the best iterate, including its primal candidate.
    pub best_eval: DualEvalResult,
    /// Evaluation at the iterate whose primal candidate was feasible with
    /// the largest objective, if any was.
    pub best_feasible: Option<DualEvalResult>,
}

/// Subgradient in reduced coordinates: `[g_λ, g_μ(rt_0), g_μ(rt_1), ...]`.
#[derive(Debug, Clone)]
struct BundleEntry {
    x: Vec<f64>,
    theta: f64,
    g: Vec<f64>,
}

/// Termination test of the refined rule on a reduced subgradient `g` at the
/// reduced multipliers `x`.
struct StopRule<'a> {
    params: &'a DualParams,
    /// Constraint right-hand sides `[P, d_rt...]`.
    rhs: Vec<f64>,
}

impl StopRule<'_> {
    fn accepts(&self, x: &[f64], g: &[f64]) -> bool {
        g.iter().zip(x).zip(&self.rhs).all(|((&gi, &xi), &b)| {
            gi.max(0.0) <= self.params.eps_feas * b && (xi * gi).abs() <= self.params.eps_comp
        })
    }

    fn penalty(&self, x: &[f64], g: &[f64]) -> f64 {
        g.iter()
            .zip(x)
            .zip(&self.rhs)
            .map(|((&gi, &xi), &b)| {
                let feas = gi.max(0.0) / (self.params.eps_feas * b);
                let comp = xi * gi / self.params.eps_comp;
                feas * feas + comp * comp
            })
            .sum()
    }

    fn penalty_grad(&self, x: &[f64], g: &[f64]) -> Vec<f64> {
        g.iter()
            .zip(x)
            .zip(&self.rhs)
            .map(|((&gi, &xi), &b)| {
                let s = self.params.eps_feas * b;
                let c = self.params.eps_comp;
                2.0 * gi.max(0.0) / (s * s) + 2.0 * xi * xi * gi / (c * c)
            })
            .collect()
    }

    /// Exact minimizer over `t ∈ [0, 1]` of the penalty at `a + t (b - a)`.
    /// The penalty is convex piecewise quadratic in `t` with kinks where a
    /// component crosses zero, so its slope is piecewise linear.
    fn line_min(&self, x: &[f64], a: &[f64], b: &[f64]) -> f64 {
        let slope = |t: f64| -> f64 {
            a.iter()
                .zip(b)
                .zip(x)
                .zip(&self.rhs)
                .map(|(((&ai, &bi), &xi), &r)| {
                    let (d, g) = (bi - ai, ai + t * (bi - ai));
                    let s = self.params.eps_feas * r;
                    let c = self.params.eps_comp;
                    2.0 * d * (g.max(0.0) / (s * s) + xi * xi * g / (c * c))
                })
                .sum()
        };
        let mut knots: Vec<f64> = a
            .iter()
            .zip(b)
            .filter(|(&ai, &bi)| bi != ai)
            .map(|(&ai, &bi)| -ai / (bi - ai))
            .filter(|&t| t > 0.0 && t < 1.0)
            .collect();
        knots.push(1.0);
        knots.sort_by(f64::total_cmp);
        let (mut t0, mut s0) = (0.0, slope(0.0));
        if s0 >= 0.0 {
            return 0.0;
        }
        for t1 in knots {
            let s1 = slope(t1);
            if s1 >= 0.0 {
                return t0 + (t1 - t0) * (-s0) / (s1 - s0);
            }
            (t0, s0) = (t1, s1);
        }
        1.0
    }

    /// Looks for a convex combination of `ε`-subgradients at `x` that passes
    /// the rule, with every `ε` below `eps`. Two sources are combined:
    /// bundle subgradients `g_i` from earlier points `x_i`, whose error is
    /// `Θ(x_i) + g_i·(x - x_i) - Θ(x)`, and per-carrier choices among the
    /// near-tied sets at `x` (`ties`, offset by `[-P, d_rt...]`). A passing
    /// combination certifies `x` as `eps`-optimal.
    fn certify(&self, x: &[f64], theta: f64, bundle: &[BundleEntry], eps: f64, ties: &Ties) -> bool {
        let verts: Vec<&[f64]> = bundle
            .iter()
            .filter(|b| {
                let lin: f64 = b.g.iter().zip(x).zip(&b.x).map(|((g, xc), xb)| g * (xc - xb)).sum();
                b.theta + lin - theta <= eps
            })
            .map(|b| b.g.as_slice())
            .collect();
        if verts.iter().any(|v| self.accepts(x, v)) {
            return true;
        }
        let dot = |v: &[f64], grad: &[f64]| v.iter().zip(grad).map(|(a, b)| a * b).sum::<f64>();
        // Linear minimization over the union of both sources.
        let lmo = |grad: &[f64]| -> Vec<f64> {
            let from_ties = ties.minimize(grad);
            match verts.iter().min_by(|a, b| dot(a, grad).total_cmp(&dot(b, grad))) {
                Some(v) if dot(v, grad) < dot(&from_ties, grad) => v.to_vec(),
                _ => from_ties,
            }
        };
        let mut cur = lmo(&vec![0.0; x.len()]);
        if self.accepts(x, &cur) {
            return true;
        }
        for _ in 0..300 {
            let grad = self.penalty_grad(x, &cur);
            let target = lmo(&grad);
            let gap = dot(&cur, &grad) - dot(&target, &grad);
            if gap <= 1e-12 * (1.0 + self.penalty(x, &cur)) {
                break;
            }
            let t = self.line_min(x, &cur, &target);
            cur = cur.iter().zip(&target).map(|(a, b)| a + t * (b - a)).collect();
            if self.accepts(x, &cur) {
                return true;
            }
        }
        false
    }
}

/// Near-tied sets per carrier; a choice of one option per carrier gives the
/// subgradient `offset + Σ_n option_n`.
struct Ties {
    offset: Vec<f64>,
    options: Vec<Vec<Vec<f64>>>,
}

impl Ties {
    fn minimize(&self, grad: &[f64]) -> Vec<f64> {
        let mut g = self.offset.clone();
        for opts in &self.options {
            let dot = |v: &Vec<f64>| v.iter().zip(grad).map(|(a, b)| a * b).sum::<f64>();
            let best = opts.iter().min_by(|a, b| dot(a).total_cmp(&dot(b))).expect("non-empty");
            for (gi, bi) in g.iter_mut().zip(best) {
                *gi += bi;
            }
        }
        g
    }
}

/// Runs the projected subgradient ascent from `μ = 0`.
pub fn solve_dual(inst: &ProblemInstance, pre: &SetPrecompute, params: &DualParams) -> Result<DualSolution> {
    solve_dual_from(inst, pre, params, None)
}

/// As [`solve_dual`], optionally warm-started from `start`.
pub fn solve_dual_from(
    inst: &ProblemInstance,
    pre: &SetPrecompute,
    params: &DualParams,
    start: Option<&DualPoint>,
) -> Result<DualSolution> {
    check_inputs(pre, inst)?;
    params.validate()?;
    let users = inst.num_users();
    let rt = inst.rt_users();
    let budget = inst.power_budget();
    let mu_max = params.mu_max_factor * inst.max_weight();
    let ev = Evaluator::new(pre, inst);

    let mut mu = match start {
        Some(p) => {
            if p.mu.len() != users {
                return Err(invalid("warm start has the wrong number of users"));
            }
            (0..users)
                .map(|k| if inst.is_real_time(k) { p.mu[k].clamp(0.0, mu_max) } else { 0.0 })
                .collect()
        }
        None => vec![0.0; users],
    };
    let weights_of = |mu: &[f64]| -> Vec<f64> { inst.weights().iter().zip(mu).map(|(c, m)| c + m).collect() };

    // λ⁰: budget-matching multiplier at the starting μ.
    let warm_lambda = start.map(|p| p.lambda).filter(|&l| l > 0.0);
    let (init, _) = ev.lambda_root(&mu, &weights_of(&mu), warm_lambda, params.lambda_min);
    let lambda_scale = init.lambda.max(params.lambda_min);
    let mut lambda = init.lambda;

    let mut rhs = vec![budget];
    rhs.extend(rt.iter().map(|&k| inst.min_rate(k)));
    let rule = StopRule { params, rhs };
    let reduce = |lambda: f64, mu: &[f64]| -> Vec<f64> {
        let mut x = vec![lambda];
        x.extend(rt.iter().map(|&k| mu[k]));
        x
    };
    let subgradient = |s: &Summary| -> Vec<f64> {
        let mut g = vec![s.power - budget];
        g.extend(rt.iter().map(|&k| inst.min_rate(k) - s.rates[k]));
        g
    };

    let mut bundle: Vec<BundleEntry> = Vec::new();
    let mut coord_scale = vec![1.0_f64; rt.len() + 1];
    let mut prev_sign = vec![0.0_f64; rt.len() + 1];
    let mut trace = Vec::new();
    let mut best: Option<(Summary, Vec<f64>)> = None;
    let mut best_feasible: Option<(f64, Summary, Vec<f64>)> = None;
    let rate_floor: Vec<f64> = inst.min_rates().iter().map(|d| d * (1.0 - params.tolerances.rate)).collect();
    let mut converged = false;
    let mut iterations = 0;

    for i in 1..=params.max_iterations {
        iterations = i;
        let weights = weights_of(&mu);
        let (summary, below) = match params.lambda_rule {
            LambdaRule::Exact => ev.lambda_root(&mu, &weights, Some(lambda), params.lambda_min),
            LambdaRule::Subgradient => (ev.summarize(lambda, &mu, &weights), None),
        };
        lambda = summary.lambda;
        let x = reduce(lambda, &mu);
        let g = subgradient(&summary);

        let g_mu_norm = g[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        trace.push(TraceRecord {
            iteration: i,
            theta: summary.theta,
            lambda,
            mu: rt.iter().map(|&k| mu[k]).collect(),
            g_lambda: g[0],
            g_mu_norm,
            power: summary.power,
            rt_rates: rt.iter().map(|&k| summary.rates[k]).collect(),
        });

        if best.as_ref().is_none_or(|(b, _)| summary.theta > b.theta) {
            best = Some((summary.clone(), mu.clone()));
        }
        // Candidate objective and feasibility straight from the summary; the
        // allocation is only built for the winner.
        if summary.power <= budget * (1.0 + params.tolerances.power)
            && rt.iter().all(|&k| summary.rates[k] >= rate_floor[k])
        {
            let objective: f64 = summary.rates.iter().zip(inst.weights()).map(|(r, c)| r * c).sum();
            if best_feasible.as_ref().is_none_or(|(o, _, _)| objective > *o) {
                best_feasible = Some((objective, summary.clone(), mu.clone()));
            }
        }

        for s in std::iter::once(&summary).chain(below.as_ref()) {
            bundle.push(BundleEntry {
                x: reduce(s.lambda, &mu),
                theta: s.theta,
                g: subgradient(s),
            });
        }
        let excess = bundle.len().saturating_sub(params.bundle_size.max(2));
        bundle.drain(..excess);

        let eps = params.certificate_tol * summary.theta.abs().max(1.0);
        if rule.accepts(&x, &g) || {
            let tau = eps / pre.num_carriers() as f64;
            let ties = Ties {
                offset: std::iter::once(-budget).chain(rt.iter().map(|&k| inst.min_rate(k))).collect(),
                options: ev.tied_options(lambda, &weights, &rt, tau),
            };
            rule.certify(&x, summary.theta, &bundle, eps, &ties)
        } {
            converged = true;
            break;
        }

        // Step on normalized residuals.
        // Under the exact rule μ ascends the profile max_λ Θ(λ, μ), whose
        // subgradient mixes both sides of the power crossing so that the
        // power residual vanishes.
        let rate_of = |k: usize| -> f64 {
            match &below {
                Some(lo) if lo.power > budget && summary.power < budget => {
                    let w = (budget - summary.power) / (lo.power - summary.power);
                    (1.0 - w) * summary.rates[k] + w * lo.rates[k]
                }
                _ => summary.rates[k],
            }
        };
        let mut scaled: Vec<f64> = rt.iter().map(|&k| (inst.min_rate(k) - rate_of(k)) / inst.min_rate(k)).collect();
        let lambda_scaled = g[0] / budget;
        if params.lambda_rule == LambdaRule::Subgradient {
            scaled.push(lambda_scaled);
        }
        let norm = scaled.iter().map(|v| v * v).sum::<f64>().sqrt();
        let alpha = match params.step_rule {
            StepRule::Fixed | StepRule::Adaptive => params.step,
            StepRule::Normalized => {
                if norm > 0.0 {
                    params.step / norm
                } else {
                    0.0
                }
            }
            StepRule::Diminishing => params.step / (i as f64).sqrt(),
        };
        if params.step_rule == StepRule::Adaptive {
            for (j, v) in scaled.iter_mut().enumerate() {
                let sign = v.signum() * f64::from(*v != 0.0);
                if sign * prev_sign[j] < 0.0 {
                    coord_scale[j] *= 0.5;
                } else if sign != 0.0 {
                    coord_scale[j] = (coord_scale[j] * 1.2).min(4.0);
                }
                if sign != 0.0 {
                    prev_sign[j] = sign;
                }
                *v *= coord_scale[j];
            }
        }
        let mu_scale = inst.max_weight();
        for (j, &k) in rt.iter().enumerate() {
            mu[k] = (mu[k] + alpha * mu_scale * scaled[j]).clamp(0.0, mu_max);
        }
        if params.lambda_rule == LambdaRule::Subgradient {
            lambda = (lambda + alpha * lambda_scale * scaled[rt.len()]).max(params.lambda_min);
        }
    }

    let (best_summary, best_mu) = best.expect("at least one iteration runs");
    let best_eval = ev.full_eval(&best_summary, &best_mu, &params.tolerances)?;
    let best_feasible = match best_feasible {
        Some((_, s, m)) => Some(ev.full_eval(&s, &m, &params.tolerances)?),
        None => None,
    };
    Ok(DualSolution {
        best_point: best_eval.point.clone(),
        best_theta: best_summary.theta,
        upper_bound: -best_summary.theta,
        iterations,
        converged,
        trace,
        best_eval,
        best_feasible,
    })
}

/// Exact power allocation for a fixed SDMA assignment.
///
/// With the sets fixed the problem is concave in the powers. Each rate
/// constraint is met at minimum transmit power by water-filling the user's
/// own carriers to a level `W_k`; the power multiplier is then the unique
/// value at which the water levels `max(c_k/(λ ln 2), W_k)` exhaust the
/// budget. This is the dual solution of the fixed-assignment problem, in
/// closed form up to a one-dimensional root.
///
/// The returned allocation never exceeds the budget. If the rate targets
/// alone need more than the budget, every target is scaled by the largest
/// common fraction that fits and the allocation is flagged rate-infeasible.
pub fn power_allocation_fixed(
    assignment: &[Option<usize>],
    inst: &ProblemInstance,
    pre: &SetPrecompute,
    params: &DualParams,
) -> Result<Allocation> {
    Ok(fixed_allocation(assignment, inst, pre, params)?.allocation)
}

/// Fixed-assignment allocation with its multipliers.
#[derive(Debug, Clone)]
pub struct FixedAllocation {
    pub allocation: Allocation,
    pub point: Option<DualPoint>,
}

pub fn fixed_allocation(
    assignment: &[Option<usize>],
    inst: &ProblemInstance,
    pre: &SetPrecompute,
    params: &DualParams,
) -> Result<FixedAllocation> {
    check_inputs(pre, inst)?;
    let (users, carriers, m) = (inst.num_users(), inst.num_subcarriers(), inst.num_antennas());
    if assignment.len() != carriers {
        return Err(invalid("assignment needs one entry per subcarrier"));
    }
    // (carrier, set, position, γ²) per user.
    let mut entries: Vec<Vec<(usize, usize, usize, f64)>> = vec![Vec::new(); users];
    for (n, choice) in assignment.iter().enumerate() {
        let Some(s) = *choice else { continue };
        if s >= pre.num_sets() {
            return Err(invalid(format!("set index {s} out of range")));
        }
        if !pre.is_usable(n, s) {
            return Err(Error::RejectedSet { carrier: n, set: s });
        }
        for (pos, &k) in pre.set(s).members().iter().enumerate() {
            entries[k].push((n, s, pos, pre.gamma_sq(n, s)[pos]));
        }
    }

    let sorted: Vec<Vec<f64>> = entries
        .iter()
        .map(|e| {
            let mut g: Vec<f64> = e.iter().map(|e| e.3).collect();
            g.sort_by(f64::total_cmp);
            g
        })
        .collect();
    let levels_for = |fraction: f64| -> Vec<f64> {
        (0..users)
            .map(|k| {
                let d = fraction * inst.min_rate(k);
                if d <= 0.0 || sorted[k].is_empty() {
                    0.0
                } else {
                    rate_target_level(&sorted[k], d)
                }
            })
            .collect()
    };
    let target_power = |levels: &[f64]| -> f64 {
        (0..users)
            .map(|k| sorted[k].iter().map(|g| (levels[k] - g).max(0.0)).sum::<f64>())
            .sum()
    };
    let budget = inst.power_budget();

    // Rate-target water levels. If the targets alone exceed the budget, they
    // are scaled by a common fraction so the result stays within budget.
    let mut target_level = levels_for(1.0);
    if target_power(&target_level) > budget {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if target_power(&levels_for(mid)) <= budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        target_level = levels_for(lo);
    }

    let level_at = |x: f64, k: usize| -> f64 { (inst.weight(k) * x).max(target_level[k]) };
    let power_at = |x: f64| -> f64 {
        (0..users)
            .map(|k| {
                let l = level_at(x, k);
                entries[k].iter().map(|e| (l - e.3).max(0.0)).sum::<f64>()
            })
            .sum()
    };

    // x = 1/(λ ln 2); power is continuous and non-decreasing in x.
    let any_entries = entries.iter().any(|e| !e.is_empty());
    let x = if !any_entries || power_at(0.0) >= budget {
        0.0
    } else {
        let mut hi = 1.0;
        while power_at(hi) < budget {
            hi *= 2.0;
            if hi > 1e300 {
                break;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if power_at(mid) <= budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // Power is piecewise linear in x; interpolate inside the final bracket.
        let (plo, phi) = (power_at(lo), power_at(hi));
        if phi > plo {
            let t = lo + (budget - plo) / (phi - plo) * (hi - lo);
            if power_at(t) <= budget { t } else { lo }
        } else {
            lo
        }
    };

    let mut powers = vec![vec![0.0; carriers]; users];
    let mut beams = vec![vec![ComplexVector::zeros(m); carriers]; users];
    let mut assigned = vec![Vec::new(); carriers];
    for k in 0..users {
        let level = level_at(x, k);
        for &(n, s, pos, g2) in &entries[k] {
            let p = (level / g2 - 1.0).max(0.0);
            if p > 0.0 {
                powers[k][n] = p;
                beams[k][n] = pre.direction(n, s, pos).scaled(p.sqrt());
                assigned[n].push(k);
            }
        }
    }
    for a in &mut assigned {
        a.sort_unstable();
    }
    let allocation = Allocation::from_beams(inst, pre.channels(), assigned, powers, beams, &params.tolerances)?;
    let point = (x > 0.0).then(|| {
        let lambda = (1.0 / (x * LN_2)).max(params.lambda_min);
        let mu = (0..users)
            .map(|k| (target_level[k] / x - inst.weight(k)).max(0.0))
            .collect();
        DualPoint { lambda, mu }
    });
    Ok(FixedAllocation { allocation, point })
}

/// Smallest water level `W` with `Σ_e max(0, log2(W/γ²_e)) ≥ rate`, for
/// `gamma_sq` sorted ascending and non-empty.
fn rate_target_level(gamma_sq: &[f64], rate: f64) -> f64 {
    let mut log_sum = 0.0;
    let mut level = f64::INFINITY;
    for (i, g) in gamma_sq.iter().enumerate() {
        log_sum += g.log2();
        let cand = ((rate + log_sum) / (i + 1) as f64).exp2();
        let next = gamma_sq.get(i + 1).copied().unwrap_or(f64::INFINITY);
        level = cand;
        if cand <= next {
            break;
        }
    }
    level
}
