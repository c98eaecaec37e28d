//! Reliability-based design optimization as a double loop: an outer search
//! over design variables, and per candidate an inner worst-case bound on the
//! failure probability (and, for stochastic costs, on the cost expectation).
//!
//! A candidate is feasible when its sharpest upper failure-probability bound
//! stays at or below the admissible value, so feasibility is certified
//! against every measure the uncertainty description admits. Designs may
//! couple back into the uncertainty model by steering an interval or a
//! moment box (midpoint coupling with fixed width).

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::bounds::{sharpest_bound, BoundSide};
use crate::dirac::DiracMeasure;
use crate::error::{Error, Result};
use crate::model::{self, Diagnostic, EventSpec, Interval, ResponseSpec, UQProblem};
use crate::optimizer::{self, EvalTag, OptimizerConfig, Strategy};
use crate::registry;
use crate::sampling::EstimatorConfig;

/// Penalty added to infeasible candidates in the generic outer search,
/// graded by the relative constraint violation so the search is still
/// pulled toward the feasible region.
const INFEASIBILITY_PENALTY: f64 = 1e9;
/// Resolution of the per-candidate cache: design vectors are quantized to
/// this grid before lookup, since the outer optimizers revisit candidates.
const THETA_QUANTUM: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum VariableKind {
    Continuous { lower: f64, upper: f64 },
    /// One value from an explicit list.
    Integer { choices: Vec<i64> },
    /// `count` distinct values from a pool; decoding guarantees no
    /// duplicates for any optimizer input.
    UniqueIntegers { pool: Vec<i64>, count: usize },
}

impl VariableKind {
    /// Number of design-vector entries this variable occupies.
    pub fn slots(&self) -> usize {
        match self {
            VariableKind::Continuous { .. } | VariableKind::Integer { .. } => 1,
            VariableKind::UniqueIntegers { count, .. } => *count,
        }
    }

    fn raw_bounds(&self) -> Vec<(f64, f64)> {
        match self {
            VariableKind::Continuous { lower, upper } => vec![(*lower, *upper)],
            VariableKind::Integer { choices } => vec![(0.0, choices.len() as f64)],
            VariableKind::UniqueIntegers { count, .. } => vec![(0.0, 1.0); *count],
        }
    }
}

/// Design-variable coupling into the uncertainty model: the referenced
/// descriptor becomes an interval of fixed width centered at the variable's
/// current value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Coupling {
    /// Replace the quantity's range with [θ − width/2, θ + width/2].
    IntervalMidpoint { quantity: String, width: f64 },
    /// Replace the bounds of the quantity's moment constraint of the given
    /// order with [θ − width/2, θ + width/2].
    MomentMidpoint { quantity: String, order: u32, width: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignVariable {
    pub name: String,
    pub kind: VariableKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<Coupling>,
}

impl DesignVariable {
    pub fn continuous(name: &str, lower: f64, upper: f64) -> Self {
        Self {
            name: name.to_string(),
            kind: VariableKind::Continuous { lower, upper },
            coupling: None,
        }
    }

    pub fn with_coupling(mut self, coupling: Coupling) -> Self {
        self.coupling = Some(coupling);
        self
    }
}

/// Cost of a candidate: either a registered deterministic function of θ, or
/// a worst-case bound on the expectation of a response over the same
/// uncertainty set as the reliability constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostSpec {
    Deterministic { function: String },
    ExpectationBound { response: ResponseSpec, side: BoundSide },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilitySpec {
    pub problem: UQProblem,
    pub p_adm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignProblem {
    pub variables: Vec<DesignVariable>,
    pub cost: CostSpec,
    pub reliability: ReliabilitySpec,
    pub direction: Direction,
}

/// Structural checks of the design layer; the embedded uncertainty model is
/// validated separately by the inner solvers.
pub fn validate_design(problem: &DesignProblem) -> Vec<Diagnostic> {
    let mut out = model::validate(&problem.reliability.problem);
    let mut diag = |msg: String| {
        out.push(Diagnostic { quantity: None, message: msg });
    };
    if problem.variables.is_empty() {
        diag("design declares no variables".into());
    }
    if !(problem.reliability.p_adm > 0.0 && problem.reliability.p_adm < 1.0) {
        diag(format!(
            "admissible failure probability must lie in (0, 1), got {}",
            problem.reliability.p_adm
        ));
    }
    for (i, v) in problem.variables.iter().enumerate() {
        if problem.variables[..i].iter().any(|o| o.name == v.name) {
            diag(format!("duplicate design variable name `{}`", v.name));
        }
        match &v.kind {
            VariableKind::Continuous { lower, upper } => {
                if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                    diag(format!(
                        "variable `{}` needs finite bounds with lower < upper, got [{lower}, {upper}]",
                        v.name
                    ));
                }
            }
            VariableKind::Integer { choices } => {
                if choices.is_empty() {
                    diag(format!("variable `{}` has an empty choice list", v.name));
                }
            }
            VariableKind::UniqueIntegers { pool, count } => {
                if *count == 0 || pool.len() < *count {
                    diag(format!(
                        "variable `{}` wants {count} distinct values from a pool of {}",
                        v.name,
                        pool.len()
                    ));
                }
                let mut seen = std::collections::HashSet::new();
                if pool.iter().any(|p| !seen.insert(*p)) {
                    diag(format!("variable `{}` has duplicate pool entries", v.name));
                }
            }
        }
        if let Some(coupling) = &v.coupling {
            if !matches!(v.kind, VariableKind::Continuous { .. }) {
                diag(format!("variable `{}`: couplings require a continuous variable", v.name));
            }
            let (qname, width) = match coupling {
                Coupling::IntervalMidpoint { quantity, width } => (quantity, width),
                Coupling::MomentMidpoint { quantity, width, .. } => (quantity, width),
            };
            if !(width.is_finite() && *width > 0.0) {
                diag(format!("variable `{}`: coupling width must be positive", v.name));
            }
            match problem.reliability.problem.quantity(qname) {
                None => diag(format!(
                    "variable `{}` couples to unknown quantity `{qname}`",
                    v.name
                )),
                Some(q) if !q.is_epistemic() => diag(format!(
                    "variable `{}` couples to aleatory quantity `{qname}`; couplings steer epistemic descriptors",
                    v.name
                )),
                Some(q) => {
                    if let Coupling::MomentMidpoint { order, .. } = coupling {
                        if !q.moment_constraints.iter().any(|c| c.order == *order) {
                            diag(format!(
                                "variable `{}` couples to missing order-{order} moment of `{qname}`",
                                v.name
                            ));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Total design-vector length (sum of per-variable slots).
pub fn design_dim(problem: &DesignProblem) -> usize {
    problem.variables.iter().map(|v| v.kind.slots()).sum()
}

/// Physical design vector from raw optimizer coordinates: continuous slots
/// clamp into their interval, integer slots select by index, unique-integer
/// slots select without replacement so no candidate ever carries duplicates.
pub fn decode_theta(variables: &[DesignVariable], raw: &[f64]) -> Vec<f64> {
    let mut theta = Vec::with_capacity(raw.len());
    let mut i = 0;
    for v in variables {
        match &v.kind {
            VariableKind::Continuous { lower, upper } => {
                theta.push(raw[i].clamp(*lower, *upper));
                i += 1;
            }
            VariableKind::Integer { choices } => {
                let idx = (raw[i].max(0.0).floor() as usize).min(choices.len() - 1);
                theta.push(choices[idx] as f64);
                i += 1;
            }
            VariableKind::UniqueIntegers { pool, count } => {
                let mut remaining = pool.clone();
                for k in 0..*count {
                    let u = raw[i + k].clamp(0.0, 1.0);
                    let idx =
                        ((u * remaining.len() as f64).floor() as usize).min(remaining.len() - 1);
                    theta.push(remaining.remove(idx) as f64);
                }
                i += count;
            }
        }
    }
    theta
}

fn check_admissible(variables: &[DesignVariable], theta: &[f64]) -> Result<()> {
    if theta.len() != variables.iter().map(|v| v.kind.slots()).sum::<usize>() {
        return Err(Error::InvalidArgument(format!(
            "design vector has {} entries for {} slots",
            theta.len(),
            variables.iter().map(|v| v.kind.slots()).sum::<usize>()
        )));
    }
    let mut i = 0;
    for v in variables {
        match &v.kind {
            VariableKind::Continuous { lower, upper } => {
                let t = theta[i];
                if !(t.is_finite() && *lower <= t && t <= *upper) {
                    return Err(Error::InvalidArgument(format!(
                        "variable `{}` = {t} outside [{lower}, {upper}]",
                        v.name
                    )));
                }
                i += 1;
            }
            VariableKind::Integer { choices } => {
                let t = theta[i];
                if !choices.iter().any(|&c| c as f64 == t) {
                    return Err(Error::InvalidArgument(format!(
                        "variable `{}` = {t} is not one of the allowed choices",
                        v.name
                    )));
                }
                i += 1;
            }
            VariableKind::UniqueIntegers { pool, count } => {
                let vals = &theta[i..i + count];
                for (k, t) in vals.iter().enumerate() {
                    if !pool.iter().any(|&p| p as f64 == *t) {
                        return Err(Error::InvalidArgument(format!(
                            "variable `{}` entry {k} = {t} is not in the pool",
                            v.name
                        )));
                    }
                }
                let mut seen = std::collections::HashSet::new();
                if vals.iter().any(|t| !seen.insert(t.to_bits())) {
                    return Err(Error::InvalidArgument(format!(
                        "variable `{}` carries duplicate values",
                        v.name
                    )));
                }
                i += count;
            }
        }
    }
    Ok(())
}

/// Rewrite the uncertainty model for a concrete design vector: θ is exposed
/// to the response, and coupled descriptors move to their θ-centered
/// intervals. Uncoupled quantities are untouched.
pub fn resolve_coupling(problem: &DesignProblem, theta: &[f64]) -> Result<UQProblem> {
    resolve_onto(problem, &problem.reliability.problem, theta)
}

fn resolve_onto(problem: &DesignProblem, uq: &UQProblem, theta: &[f64]) -> Result<UQProblem> {
    check_admissible(&problem.variables, theta)?;
    let mut out = uq.clone();
    out.response.theta = theta.to_vec();
    let mut slot = 0;
    for v in &problem.variables {
        let value = theta[slot];
        slot += v.kind.slots();
        let Some(coupling) = &v.coupling else {
            continue;
        };
        match coupling {
            Coupling::IntervalMidpoint { quantity, width } => {
                let q = lookup_quantity(&mut out, quantity)?;
                let (lo, hi) = (value - width / 2.0, value + width / 2.0);
                if lo < q.range.lower || hi > q.range.upper {
                    return Err(Error::CouplingOutOfRange {
                        variable: v.name.clone(),
                        quantity: quantity.clone(),
                        detail: format!(
                            "interval [{lo}, {hi}] escapes physical range [{}, {}]",
                            q.range.lower, q.range.upper
                        ),
                    });
                }
                q.range = Interval { lower: lo, upper: hi };
            }
            Coupling::MomentMidpoint { quantity, order, width } => {
                let range = problem
                    .reliability
                    .problem
                    .quantity(quantity)
                    .map(|q| q.range)
                    .unwrap_or(Interval { lower: f64::NEG_INFINITY, upper: f64::INFINITY });
                let q = lookup_quantity(&mut out, quantity)?;
                let c = q
                    .moment_constraints
                    .iter_mut()
                    .find(|c| c.order == *order)
                    .ok_or_else(|| Error::InvalidArgument(format!(
                        "quantity `{quantity}` has no order-{order} moment constraint to couple"
                    )))?;
                let (lo, hi) = (value - width / 2.0, value + width / 2.0);
                if *order == 1 && (lo < range.lower || hi > range.upper) {
                    return Err(Error::CouplingOutOfRange {
                        variable: v.name.clone(),
                        quantity: quantity.clone(),
                        detail: format!(
                            "mean bound [{lo}, {hi}] escapes physical range [{}, {}]",
                            range.lower, range.upper
                        ),
                    });
                }
                c.lower = lo;
                c.upper = hi;
            }
        }
    }
    Ok(out)
}

fn lookup_quantity<'a>(
    problem: &'a mut UQProblem,
    name: &str,
) -> Result<&'a mut crate::model::UncertainQuantity> {
    problem
        .quantities
        .iter_mut()
        .find(|q| q.name == name)
        .ok_or_else(|| Error::UnknownQuantity { name: name.to_string() })
}

/// Inner-loop budgets shared by all candidates of one design run. The
/// optimizer's box is rebuilt per problem; the seeds are used as configured
/// for every candidate, so identical candidates reproduce identical inner
/// results (and can be cached).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InnerConfigs {
    pub optimizer: OptimizerConfig,
    pub estimator: EstimatorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignEvaluation {
    pub theta: Vec<f64>,
    pub cost_value: f64,
    pub pof_upper: f64,
    pub pof_error: f64,
    pub feasible: bool,
    /// Worst-case measures for the failure probability, one per epistemic
    /// quantity.
    pub pof_certificate: Vec<DiracMeasure>,
    /// Worst-case measures for the cost bound when the cost is stochastic.
    pub cost_certificate: Option<Vec<DiracMeasure>>,
}

/// Full evaluation of one design candidate: worst-case failure probability,
/// cost, and the feasibility verdict against the admissible value.
pub fn evaluate_design(
    problem: &DesignProblem,
    theta: &[f64],
    cfgs: &InnerConfigs,
) -> Result<DesignEvaluation> {
    let reliability = resolve_coupling(problem, theta)?;
    let pof = sharpest_bound(&reliability, BoundSide::Upper, &cfgs.optimizer, &cfgs.estimator)?;
    let (cost_value, cost_certificate) = match &problem.cost {
        CostSpec::Deterministic { function } => {
            let f = registry::lookup(function)?;
            let value = f(theta, &[]);
            if !value.is_finite() {
                return Err(Error::NonFiniteModel { sample: theta.to_vec() });
            }
            (value, None)
        }
        CostSpec::ExpectationBound { response, side } => {
            let cost_uq = UQProblem {
                quantities: problem.reliability.problem.quantities.clone(),
                response: response.clone(),
                event: EventSpec::Expectation,
            };
            let resolved = resolve_onto(problem, &cost_uq, theta)?;
            let bound = sharpest_bound(&resolved, *side, &cfgs.optimizer, &cfgs.estimator)?;
            (bound.value, Some(bound.certificate))
        }
    };
    Ok(DesignEvaluation {
        theta: theta.to_vec(),
        cost_value,
        pof_upper: pof.value,
        pof_error: pof.estimator_error,
        feasible: pof.value <= problem.reliability.p_adm,
        pof_certificate: pof.certificate,
        cost_certificate,
    })
}

/// Outcome of a design run. `best` is absent when the budget produced no
/// feasible candidate; the history still lists everything evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub best: Option<DesignEvaluation>,
    /// Distinct candidates evaluated, in bisection call order for the
    /// scalar path and in design-vector lexicographic order for the
    /// population path (population evaluations run concurrently, so call
    /// order would not be reproducible).
    pub history: Vec<DesignEvaluation>,
}

struct EvalCache<'a> {
    problem: &'a DesignProblem,
    cfgs: &'a InnerConfigs,
    entries: Mutex<HashMap<Vec<i64>, DesignEvaluation>>,
}

impl<'a> EvalCache<'a> {
    fn new(problem: &'a DesignProblem, cfgs: &'a InnerConfigs) -> Self {
        Self { problem, cfgs, entries: Mutex::new(HashMap::new()) }
    }

    fn key(theta: &[f64]) -> Vec<i64> {
        theta.iter().map(|t| (t / THETA_QUANTUM).round() as i64).collect()
    }

    fn evaluate(&self, theta: &[f64]) -> Result<DesignEvaluation> {
        let key = Self::key(theta);
        if let Some(hit) = self.entries.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let eval = evaluate_design(self.problem, theta, self.cfgs)?;
        self.entries.lock().unwrap().insert(key, eval.clone());
        Ok(eval)
    }

    fn sorted_history(&self) -> Vec<DesignEvaluation> {
        let map = self.entries.lock().unwrap();
        let mut all: Vec<DesignEvaluation> = map.values().cloned().collect();
        all.sort_by(|a, b| {
            a.theta
                .iter()
                .zip(&b.theta)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        all
    }
}

/// Solve the design problem. The outer strategy comes from `outer_cfg`:
/// bisection for a single continuous variable whose feasibility threshold is
/// monotone (smallest feasible value wins), or the population/descent
/// optimizers for general variable sets with an infeasibility penalty.
pub fn solve(
    problem: &DesignProblem,
    outer_cfg: &OptimizerConfig,
    cfgs: &InnerConfigs,
) -> Result<SolveReport> {
    let diags = validate_design(problem);
    if !diags.is_empty() {
        return Err(Error::InvalidProblem(diags));
    }
    match outer_cfg.strategy {
        Strategy::Bisection => solve_bisection(problem, outer_cfg, cfgs),
        Strategy::SelfAdaptiveDe | Strategy::GradientDescent => {
            solve_population(problem, outer_cfg, cfgs)
        }
    }
}

fn solve_bisection(
    problem: &DesignProblem,
    outer_cfg: &OptimizerConfig,
    cfgs: &InnerConfigs,
) -> Result<SolveReport> {
    let [variable] = problem.variables.as_slice() else {
        return Err(Error::InvalidArgument(
            "bisection outer loop needs exactly one design variable".into(),
        ));
    };
    let VariableKind::Continuous { lower, upper } = variable.kind else {
        return Err(Error::InvalidArgument(
            "bisection outer loop needs a continuous design variable".into(),
        ));
    };

    let cache = EvalCache::new(problem, cfgs);
    let history = Mutex::new(Vec::<DesignEvaluation>::new());
    let pof = |theta: f64| -> Result<f64> {
        let eval = cache.evaluate(&[theta])?;
        history.lock().unwrap().push(eval.clone());
        Ok(eval.pof_upper)
    };

    let tol = (upper - lower) * 0.5_f64.powi(outer_cfg.max_iterations.min(47) as i32);
    let target = problem.reliability.p_adm;
    // run the straddle check by hand so the two non-straddling cases can be
    // told apart: already-feasible at the low end vs infeasible everywhere
    let f_lo = pof(lower)?;
    if f_lo <= target {
        let best = cache.evaluate(&[lower])?;
        return Ok(SolveReport { best: Some(best), history: history.into_inner().unwrap() });
    }
    let f_hi = pof(upper)?;
    if f_hi > target {
        return Ok(SolveReport { best: None, history: history.into_inner().unwrap() });
    }

    let mut inner_error: Option<Error> = None;
    let best_theta = optimizer::minimize_scalar_monotone(
        |theta| match pof(theta) {
            Ok(p) => p,
            Err(e) => {
                inner_error.get_or_insert(e);
                f64::INFINITY
            }
        },
        target,
        (lower, upper),
        tol,
    )?;
    if let Some(e) = inner_error {
        return Err(e);
    }
    let best = cache.evaluate(&[best_theta])?;
    debug_assert!(best.feasible);
    Ok(SolveReport { best: Some(best), history: history.into_inner().unwrap() })
}

fn solve_population(
    problem: &DesignProblem,
    outer_cfg: &OptimizerConfig,
    cfgs: &InnerConfigs,
) -> Result<SolveReport> {
    let cache = EvalCache::new(problem, cfgs);
    let sign = match problem.direction {
        Direction::Minimize => 1.0,
        Direction::Maximize => -1.0,
    };
    let p_adm = problem.reliability.p_adm;
    let objective = |raw: &[f64], _tag: EvalTag| -> f64 {
        let theta = decode_theta(&problem.variables, raw);
        match cache.evaluate(&theta) {
            Ok(eval) => {
                let base = sign * eval.cost_value;
                if eval.feasible {
                    base
                } else {
                    INFEASIBILITY_PENALTY * (1.0 + (eval.pof_upper - p_adm) / p_adm)
                }
            }
            Err(_) => f64::INFINITY,
        }
    };

    let mut de_cfg = outer_cfg.clone();
    de_cfg.bounds = problem.variables.iter().flat_map(|v| v.kind.raw_bounds()).collect();
    optimizer::minimize(objective, &de_cfg)?;

    let history = cache.sorted_history();
    let best = history
        .iter()
        .filter(|e| e.feasible)
        .min_by(|a, b| (sign * a.cost_value).total_cmp(&(sign * b.cost_value)))
        .cloned();
    Ok(SolveReport { best, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DistributionSpec, MomentConstraint, UncertainQuantity};

    const PHI_M1: f64 = 0.15865525393145707;
    const PHI_M3: f64 = 0.0013498980316300945;

    fn std_normal(name: &str) -> UncertainQuantity {
        UncertainQuantity::aleatory(
            name,
            -10.0,
            10.0,
            DistributionSpec::Normal { mean: 0.0.into(), sd: 1.0.into() },
        )
    }

    fn inner() -> InnerConfigs {
        InnerConfigs {
            optimizer: OptimizerConfig::self_adaptive(16, 25, 0, vec![(0.0, 1.0)]),
            estimator: EstimatorConfig::line_sampling(16, 0),
        }
    }

    /// Minimize θ over [0.5, 2] with g = θ + y − z, y ∈ [θ ± 0.1], z
    /// standard normal: the worst mean sits at θ − 0.1, so the feasibility
    /// threshold is Φ(0.1 − 2θ) and the optimum for P_adm = Φ(−3) is 1.55.
    fn coupled_toy() -> DesignProblem {
        let y = UncertainQuantity::epistemic("y", 0.0, 3.0);
        let problem = UQProblem {
            quantities: vec![y, std_normal("z")],
            response: ResponseSpec::named("coupled_margin", &["y", "z"]),
            event: EventSpec::Failure,
        };
        DesignProblem {
            variables: vec![DesignVariable::continuous("t", 0.5, 2.0).with_coupling(
                Coupling::IntervalMidpoint { quantity: "y".into(), width: 0.2 },
            )],
            cost: CostSpec::Deterministic { function: "first_theta".into() },
            reliability: ReliabilitySpec { problem, p_adm: PHI_M3 },
            direction: Direction::Minimize,
        }
    }

    #[test]
    fn moment_midpoint_coupling_rewrites_the_box() {
        let k = UncertainQuantity::epistemic("k_trace", 0.0, 3000.0)
            .with_constraint(MomentConstraint::classical(1, 1400.0, 1800.0));
        let problem = DesignProblem {
            variables: vec![DesignVariable::continuous("theta_k", 200.0, 2800.0).with_coupling(
                Coupling::MomentMidpoint { quantity: "k_trace".into(), order: 1, width: 200.0 },
            )],
            cost: CostSpec::Deterministic { function: "first_theta".into() },
            reliability: ReliabilitySpec {
                problem: UQProblem {
                    quantities: vec![k],
                    response: ResponseSpec::affine(&["k_trace"], vec![1.0], -500.0),
                    event: EventSpec::Failure,
                },
                p_adm: 0.5,
            },
            direction: Direction::Minimize,
        };
        let resolved = resolve_coupling(&problem, &[1700.0]).unwrap();
        let c = &resolved.quantities[0].moment_constraints[0];
        assert_eq!((c.lower, c.upper), (1600.0, 1800.0));
        assert_eq!(resolved.response.theta, vec![1700.0]);
    }

    #[test]
    fn uncoupled_quantities_pass_through_unchanged() {
        let toy = coupled_toy();
        let resolved = resolve_coupling(&toy, &[1.0]).unwrap();
        assert_eq!(resolved.quantities[1], toy.reliability.problem.quantities[1]);
        assert_eq!(resolved.quantities[0].range.lower, 0.9);
        assert_eq!(resolved.quantities[0].range.upper, 1.1);
    }

    #[test]
    fn coupling_escaping_physical_range_is_an_error() {
        let mut toy = coupled_toy();
        toy.variables[0].kind = VariableKind::Continuous { lower: 0.0, upper: 2.0 };
        let err = resolve_coupling(&toy, &[0.05]).unwrap_err();
        match err {
            Error::CouplingOutOfRange { variable, quantity, .. } => {
                assert_eq!(variable, "t");
                assert_eq!(quantity, "y");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn deterministic_toy_evaluation_matches_normal_oracle() {
        // cost θ², g = θ − z: failure when z ≥ θ, so PoF(1) = Φ(−1)
        let problem = DesignProblem {
            variables: vec![DesignVariable::continuous("t", 0.0, 3.0)],
            cost: CostSpec::Deterministic { function: "theta_squared".into() },
            reliability: ReliabilitySpec {
                problem: UQProblem {
                    quantities: vec![std_normal("z")],
                    response: ResponseSpec::named("theta_minus_input", &["z"]),
                    event: EventSpec::Failure,
                },
                p_adm: 0.5,
            },
            direction: Direction::Minimize,
        };
        let eval = evaluate_design(&problem, &[1.0], &inner()).unwrap();
        assert!((eval.cost_value - 1.0).abs() < 1e-12);
        assert!((eval.pof_upper - PHI_M1).abs() < 0.05 * PHI_M1, "pof = {}", eval.pof_upper);
        assert!(eval.feasible);
        assert!(eval.pof_certificate.is_empty());
    }

    #[test]
    fn bisection_finds_the_exact_coupled_optimum() {
        let toy = coupled_toy();
        let outer = OptimizerConfig {
            population: 1,
            max_iterations: 24,
            seed: 0,
            bounds: vec![(0.5, 2.0)],
            strategy: Strategy::Bisection,
        };
        let report = solve(&toy, &outer, &inner()).unwrap();
        let best = report.best.expect("feasible optimum exists");
        assert!((best.theta[0] - 1.55).abs() < 1e-3, "theta = {}", best.theta[0]);
        assert!(best.feasible);
        assert!(best.pof_upper <= PHI_M3 + 1e-12);
        assert!(!report.history.is_empty());
    }

    #[test]
    fn population_outer_agrees_with_bisection() {
        let toy = coupled_toy();
        let outer = OptimizerConfig::self_adaptive(16, 40, 3, vec![(0.0, 1.0)]);
        let report = solve(&toy, &outer, &inner()).unwrap();
        let best = report.best.expect("feasible optimum exists");
        assert!((best.theta[0] - 1.55).abs() < 5e-3, "theta = {}", best.theta[0]);
    }

    #[test]
    fn slack_constraint_returns_unconstrained_optimum() {
        let mut toy = coupled_toy();
        toy.reliability.p_adm = 0.999;
        let outer = OptimizerConfig {
            population: 1,
            max_iterations: 24,
            seed: 0,
            bounds: vec![(0.5, 2.0)],
            strategy: Strategy::Bisection,
        };
        let report = solve(&toy, &outer, &inner()).unwrap();
        let best = report.best.expect("everything is feasible");
        assert_eq!(best.theta[0], 0.5);
    }

    #[test]
    fn hopeless_constraint_reports_no_best() {
        let mut toy = coupled_toy();
        toy.reliability.p_adm = 1e-9;
        let outer = OptimizerConfig {
            population: 1,
            max_iterations: 24,
            seed: 0,
            bounds: vec![(0.5, 2.0)],
            strategy: Strategy::Bisection,
        };
        let report = solve(&toy, &outer, &inner()).unwrap();
        assert!(report.best.is_none());
        assert!(!report.history.is_empty());
    }

    fn always_safe_reliability() -> ReliabilitySpec {
        ReliabilitySpec {
            problem: UQProblem {
                quantities: vec![std_normal("z")],
                response: ResponseSpec::affine(&["z"], vec![0.0], 1.0),
                event: EventSpec::Failure,
            },
            p_adm: 0.999,
        }
    }

    #[test]
    fn unique_integer_candidates_never_duplicate() {
        let problem = DesignProblem {
            variables: vec![DesignVariable {
                name: "picks".into(),
                kind: VariableKind::UniqueIntegers { pool: (0..7).collect(), count: 3 },
                coupling: None,
            }],
            cost: CostSpec::Deterministic { function: "first_theta".into() },
            reliability: always_safe_reliability(),
            direction: Direction::Minimize,
        };
        let outer = OptimizerConfig::self_adaptive(12, 15, 1, vec![(0.0, 1.0)]);
        let report = solve(&problem, &outer, &inner()).unwrap();
        for eval in &report.history {
            let mut seen = std::collections::HashSet::new();
            assert!(
                eval.theta.iter().all(|t| seen.insert(t.to_bits())),
                "duplicate in {:?}",
                eval.theta
            );
        }
        assert_eq!(report.best.unwrap().theta[0], 0.0);
    }

    #[test]
    fn integer_choices_select_the_cheapest_member() {
        let problem = DesignProblem {
            variables: vec![DesignVariable {
                name: "size".into(),
                kind: VariableKind::Integer { choices: vec![9, 2, 5] },
                coupling: None,
            }],
            cost: CostSpec::Deterministic { function: "first_theta".into() },
            reliability: always_safe_reliability(),
            direction: Direction::Minimize,
        };
        let outer = OptimizerConfig::self_adaptive(10, 12, 2, vec![(0.0, 1.0)]);
        let report = solve(&problem, &outer, &inner()).unwrap();
        assert_eq!(report.best.unwrap().theta[0], 2.0);
    }

    #[test]
    fn inadmissible_theta_is_rejected() {
        let toy = coupled_toy();
        assert!(evaluate_design(&toy, &[9.0], &inner()).is_err());
        assert!(evaluate_design(&toy, &[1.0, 2.0], &inner()).is_err());
    }

    #[test]
    fn stochastic_cost_uses_expectation_bound() {
        // cost = worst-case E[y] over mean box [1, 2]; reliability always safe
        let y = UncertainQuantity::epistemic("y", 0.0, 3.0)
            .with_constraint(MomentConstraint::classical(1, 1.0, 2.0));
        let problem = DesignProblem {
            variables: vec![DesignVariable::continuous("t", 0.0, 1.0)],
            cost: CostSpec::ExpectationBound {
                response: ResponseSpec::affine(&["y"], vec![1.0], 0.0),
                side: BoundSide::Upper,
            },
            reliability: ReliabilitySpec {
                problem: UQProblem {
                    quantities: vec![
                        y,
                        std_normal("z"),
                    ],
                    response: ResponseSpec::affine(&["y", "z"], vec![0.0, 0.0], 1.0),
                    event: EventSpec::Failure,
                },
                p_adm: 0.999,
            },
            direction: Direction::Minimize,
        };
        let mut cfgs = inner();
        cfgs.optimizer = OptimizerConfig::self_adaptive(24, 40, 5, vec![(0.0, 1.0)]);
        let eval = evaluate_design(&problem, &[0.5], &cfgs).unwrap();
        assert!((eval.cost_value - 2.0).abs() < 1e-6, "cost = {}", eval.cost_value);
        assert!(eval.cost_certificate.is_some());
    }

    #[test]
    fn design_validation_catches_structural_problems() {
        let mut toy = coupled_toy();
        toy.reliability.p_adm = 0.0;
        toy.variables.push(DesignVariable::continuous("t", 1.0, 0.5));
        toy.variables.push(DesignVariable {
            name: "u".into(),
            kind: VariableKind::Integer { choices: vec![1] },
            coupling: Some(Coupling::IntervalMidpoint { quantity: "ghost".into(), width: 0.1 }),
        });
        let diags = validate_design(&toy);
        assert!(diags.iter().any(|d| d.message.contains("(0, 1)")));
        assert!(diags.iter().any(|d| d.message.contains("duplicate design variable")));
        assert!(diags.iter().any(|d| d.message.contains("continuous variable")));
        assert!(diags.iter().any(|d| d.message.contains("unknown quantity `ghost`")));
    }
}
