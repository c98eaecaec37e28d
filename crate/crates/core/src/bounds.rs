//! Sharpest lower/upper bounds on a failure probability or a response
//! expectation over all measures admissible under the declared intervals and
//! moment boxes.
//!
//! The extremizing measures are finite convex combinations of point masses,
//! one per epistemic quantity, with `1 + #constraints` support points. The
//! joint functional is the exact tensor sum over all support-point
//! combinations of the aleatory-conditional value χ, so the search space is
//! the product of the per-quantity measure manifolds. Each measure is
//! parameterized in canonical-moment coordinates: constrained orders carry a
//! coordinate that is mapped into the intersection of the constraint box
//! with the reachable moment range (which canonical coordinates make an
//! interval), unconstrained orders carry the canonical coordinate itself.
//! That turns every moment box into a plain unit box for the optimizer.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::canonical::{binom, canonical_to_dirac, canonical_to_moments, CANONICAL_CLAMP};
use crate::dirac::DiracMeasure;
use crate::dist::Marginal;
use crate::error::{Error, Result};
use crate::model::{
    self, DistributionSpec, EventSpec, MomentConstraint, MomentKind, Param, ResponseForm,
    ResponseSpec, UQProblem,
};
use crate::optimizer::{self, EvalTag, OptimizerConfig};
use crate::registry;
use crate::sampling::{chi_expectation, chi_failure, mix_seed, AleatoryBlock, EstimatorConfig};

/// Hard cap on the tensor-product enumeration; larger products are an error
/// because the joint functional is an exact finite sum and subsampling it
/// would corrupt the bound semantics.
pub const ENUMERATION_CAP: u64 = 100_000;

/// Objective value assigned to candidates whose moment targets cannot be
/// realized by any measure on the range; graded by the violation so the
/// search is pulled back toward the admissible set. Any feasible candidate
/// beats any penalized one.
pub(crate) const PENALTY_BASE: f64 = 1e9;

const UNIT: (f64, f64) = (0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSide {
    Lower,
    Upper,
}

/// Value and statistical error of one joint tensor evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// One extremal bound with its witnessing measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub which: BoundSide,
    pub value: f64,
    /// One extremizing measure per epistemic quantity, in declaration order.
    pub certificate: Vec<DiracMeasure>,
    pub estimator_error: f64,
    /// Best bound value after each optimizer generation.
    pub optimizer_trace: Vec<f64>,
}

/// Marginals for the aleatory quantities in declaration order. Distribution
/// parameters that reference epistemic quantities are resolved at the
/// midpoint of the referenced range here; the joint evaluators rebuild those
/// marginals per support-point combination.
pub fn build_aleatory_block(problem: &UQProblem) -> Result<AleatoryBlock> {
    let resolve = |name: &str| problem.quantity(name).map(|q| 0.5 * (q.range.lower + q.range.upper));
    let mut marginals = Vec::new();
    for q in problem.quantities.iter().filter(|q| !q.is_epistemic()) {
        let spec = q.distribution.as_ref().ok_or_else(|| {
            Error::InvalidArgument(format!("aleatory quantity `{}` lacks a distribution", q.name))
        })?;
        marginals.push(Marginal::from_spec(spec, &resolve)?);
    }
    Ok(AleatoryBlock::new(marginals))
}

/// Probability that the response is ≤ 0 under the product of the given
/// epistemic measures and the aleatory block: the exact weighted sum of the
/// conditional failure probability over every support-point combination.
pub fn joint_probability(
    problem: &UQProblem,
    measures: &[DiracMeasure],
    block: &AleatoryBlock,
    cfg: &EstimatorConfig,
) -> Result<JointEstimate> {
    JointContext::new(problem, Some(block))?.estimate(measures, cfg, EventSpec::Failure)
}

/// Expectation of the response under the same product structure.
pub fn joint_expectation(
    problem: &UQProblem,
    measures: &[DiracMeasure],
    block: &AleatoryBlock,
    cfg: &EstimatorConfig,
) -> Result<JointEstimate> {
    JointContext::new(problem, Some(block))?.estimate(measures, cfg, EventSpec::Expectation)
}

/// Sharpest bound of the problem's event over the admissible set, found by
/// global search in canonical-moment coordinates. The optimizer's `bounds`
/// field is replaced by the unit box of the decoded parameterization; the
/// estimator seed for each objective evaluation is derived from
/// (est seed, generation, member) so population evaluation parallelism
/// cannot change results.
pub fn sharpest_bound(
    problem: &UQProblem,
    which: BoundSide,
    opt_cfg: &OptimizerConfig,
    est_cfg: &EstimatorConfig,
) -> Result<BoundResult> {
    let diags = model::validate(problem);
    if !diags.is_empty() {
        return Err(Error::InvalidProblem(diags));
    }
    est_cfg.validate()?;
    let plans = build_plans(problem)?;
    check_enumeration(plans.iter().map(|p| p.n_points))?;
    let ctx = JointContext::new(problem, None)?;

    let total_dof: usize = plans.iter().map(|p| p.dim).sum();
    if total_dof == 0 {
        let est = ctx.estimate(&[], &est_cfg.with_seed(final_seed(est_cfg.seed)), problem.event)?;
        return Ok(BoundResult {
            which,
            value: est.value,
            certificate: Vec::new(),
            estimator_error: est.std_error,
            optimizer_trace: vec![est.value],
        });
    }

    let sign = match which {
        BoundSide::Upper => -1.0,
        BoundSide::Lower => 1.0,
    };
    let objective = |x: &[f64], tag: EvalTag| -> f64 {
        let Ok((measures, violation)) = decode_all(&plans, x) else {
            return f64::INFINITY;
        };
        if violation > 0.0 {
            return PENALTY_BASE * (1.0 + violation);
        }
        let seed = mix_seed(mix_seed(est_cfg.seed, tag.generation), tag.member);
        match ctx.estimate(&measures, &est_cfg.with_seed(seed), problem.event) {
            Ok(est) => sign * est.value,
            Err(_) => f64::INFINITY,
        }
    };

    let mut de_cfg = opt_cfg.clone();
    de_cfg.bounds = vec![(0.0, 1.0); total_dof];
    let run = optimizer::minimize(objective, &de_cfg)?;
    if !run.best_f.is_finite() || run.best_f >= PENALTY_BASE {
        return Err(Error::NoFeasibleCandidate);
    }

    let (certificate, violation) = decode_all(&plans, &run.best_x)?;
    debug_assert_eq!(violation, 0.0);
    let est =
        ctx.estimate(&certificate, &est_cfg.with_seed(final_seed(est_cfg.seed)), problem.event)?;
    Ok(BoundResult {
        which,
        value: est.value,
        certificate,
        estimator_error: est.std_error,
        optimizer_trace: run.trace.iter().map(|t| sign * t).collect(),
    })
}

/// Repeats the certificate evaluation a [`sharpest_bound`] run performs
/// last, with the same derived seed, so reported values can be audited.
pub fn reevaluate_certificate(
    problem: &UQProblem,
    certificate: &[DiracMeasure],
    est_cfg: &EstimatorConfig,
) -> Result<JointEstimate> {
    let ctx = JointContext::new(problem, None)?;
    ctx.estimate(certificate, &est_cfg.with_seed(final_seed(est_cfg.seed)), problem.event)
}

fn final_seed(seed: u64) -> u64 {
    mix_seed(mix_seed(seed, u64::MAX), 0)
}

fn check_enumeration(lens: impl Iterator<Item = usize>) -> Result<u128> {
    let mut combinations: u128 = 1;
    for len in lens {
        combinations = combinations.saturating_mul(len.max(1) as u128);
    }
    if combinations > ENUMERATION_CAP as u128 {
        return Err(Error::EnumerationTooLarge { combinations, cap: ENUMERATION_CAP });
    }
    Ok(combinations)
}

// ---------------------------------------------------------------------------
// joint evaluation over the tensor product of support points

enum CompiledForm {
    Named(registry::NamedFn),
    Affine { coeffs: Vec<f64>, offset: f64 },
}

struct CompiledResponse {
    input_indices: Vec<usize>,
    theta: Vec<f64>,
    form: CompiledForm,
}

impl CompiledResponse {
    fn compile(problem: &UQProblem, spec: &ResponseSpec) -> Result<Self> {
        let mut input_indices = Vec::with_capacity(spec.inputs.len());
        for name in &spec.inputs {
            input_indices.push(
                problem
                    .quantity_index(name)
                    .ok_or_else(|| Error::UnknownQuantity { name: name.clone() })?,
            );
        }
        let form = match &spec.form {
            ResponseForm::Named { name } => CompiledForm::Named(registry::lookup(name)?),
            ResponseForm::Affine { coeffs, offset } => {
                if coeffs.len() != input_indices.len() {
                    return Err(Error::InvalidArgument(format!(
                        "affine response has {} coefficients for {} inputs",
                        coeffs.len(),
                        input_indices.len()
                    )));
                }
                CompiledForm::Affine { coeffs: coeffs.clone(), offset: *offset }
            }
        };
        Ok(Self { input_indices, theta: spec.theta.clone(), form })
    }

    fn eval(&self, values: &[f64]) -> f64 {
        match &self.form {
            CompiledForm::Affine { coeffs, offset } => {
                let mut acc = *offset;
                for (c, &i) in coeffs.iter().zip(&self.input_indices) {
                    acc += c * values[i];
                }
                acc
            }
            CompiledForm::Named(f) => {
                let args: Vec<f64> = self.input_indices.iter().map(|&i| values[i]).collect();
                f(&self.theta, &args)
            }
        }
    }
}

struct JointContext {
    epistemic: Vec<usize>,
    epi_names: Vec<String>,
    aleatory: Vec<usize>,
    base_marginals: Vec<Marginal>,
    /// Distribution specs per aleatory slot, kept so coupled slots can be
    /// re-resolved per support-point combination.
    specs: Vec<Option<DistributionSpec>>,
    /// Aleatory slots whose distribution parameters reference epistemic
    /// quantities; these are rebuilt for every support-point combination.
    coupled: Vec<bool>,
    ranges: Vec<(f64, f64)>,
    response: CompiledResponse,
    n_quantities: usize,
}

impl JointContext {
    fn new(problem: &UQProblem, block: Option<&AleatoryBlock>) -> Result<Self> {
        let epistemic = problem.epistemic_indices();
        let epi_names = epistemic.iter().map(|&i| problem.quantities[i].name.clone()).collect();
        let aleatory: Vec<usize> = (0..problem.quantities.len())
            .filter(|i| !problem.quantities[*i].is_epistemic())
            .collect();
        let base = match block {
            Some(b) => {
                if b.dim() != aleatory.len() {
                    return Err(Error::InvalidArgument(format!(
                        "aleatory block has {} marginals for {} aleatory quantities",
                        b.dim(),
                        aleatory.len()
                    )));
                }
                b.marginals().to_vec()
            }
            None => build_aleatory_block(problem)?.marginals().to_vec(),
        };
        let specs: Vec<Option<DistributionSpec>> =
            aleatory.iter().map(|&i| problem.quantities[i].distribution.clone()).collect();
        let coupled = specs
            .iter()
            .map(|spec| {
                spec.as_ref()
                    .map(|d| d.params().iter().any(|(_, p)| matches!(p, Param::Ref { .. })))
                    .unwrap_or(false)
            })
            .collect();
        Ok(Self {
            epistemic,
            epi_names,
            aleatory,
            base_marginals: base,
            specs,
            coupled,
            ranges: problem
                .quantities
                .iter()
                .map(|q| (q.range.lower, q.range.upper))
                .collect(),
            response: CompiledResponse::compile(problem, &problem.response)?,
            n_quantities: problem.quantities.len(),
        })
    }

    fn estimate(
        &self,
        measures: &[DiracMeasure],
        cfg: &EstimatorConfig,
        event: EventSpec,
    ) -> Result<JointEstimate> {
        if measures.len() != self.epistemic.len() {
            return Err(Error::InvalidArgument(format!(
                "{} measures supplied for {} epistemic quantities",
                measures.len(),
                self.epistemic.len()
            )));
        }
        for (measure, &qi) in measures.iter().zip(&self.epistemic) {
            let (lo, hi) = self.ranges[qi];
            let tol = 1e-9 * (hi - lo);
            if measure.points().iter().any(|&p| p < lo - tol || p > hi + tol) {
                return Err(Error::InvalidMeasure(format!(
                    "support point outside range [{lo}, {hi}] of quantity #{qi}"
                )));
            }
        }
        let combos = check_enumeration(measures.iter().map(|m| m.len()))?;

        // Group combinations by their support-point tuple: coincident points
        // (clamped boundaries, converged optimizer points) share one χ
        // estimate, and their weights pool, which also keeps the error
        // accounting exact.
        let mut group_index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut groups: Vec<(Vec<f64>, f64)> = Vec::new(); // (points, pooled weight)
        let mut digits = vec![0usize; measures.len()];
        for _ in 0..combos {
            let mut points = Vec::with_capacity(measures.len());
            let mut weight = 1.0;
            for (k, m) in measures.iter().enumerate() {
                points.push(m.points()[digits[k]]);
                weight *= m.weights()[digits[k]];
            }
            let key: Vec<u64> = points.iter().map(|p| p.to_bits()).collect();
            match group_index.get(&key) {
                Some(&g) => groups[g].1 += weight,
                None => {
                    group_index.insert(key, groups.len());
                    groups.push((points, weight));
                }
            }
            for k in (0..digits.len()).rev() {
                digits[k] += 1;
                if digits[k] < measures[k].len() {
                    break;
                }
                digits[k] = 0;
            }
        }

        let mut value = 0.0;
        let mut variance = 0.0;
        for (points, weight) in &groups {
            let (chi, se) = self.conditional_value(points, cfg, event)?;
            value += weight * chi;
            variance += (weight * se) * (weight * se);
        }
        Ok(JointEstimate { value, std_error: variance.sqrt() })
    }

    /// χ for one support-point combination: conditional failure probability
    /// or conditional expectation over the aleatory block, with coupled
    /// marginals re-resolved at the combination's epistemic values. The
    /// estimator seed is derived from the point values so the estimate does
    /// not depend on enumeration order.
    fn conditional_value(
        &self,
        points: &[f64],
        cfg: &EstimatorConfig,
        event: EventSpec,
    ) -> Result<(f64, f64)> {
        let mut template = vec![0.0; self.n_quantities];
        for (&qi, &p) in self.epistemic.iter().zip(points) {
            template[qi] = p;
        }
        let resolve =
            |name: &str| self.epi_names.iter().position(|n| n == name).map(|k| points[k]);
        let marginals: Vec<Marginal> = self
            .base_marginals
            .iter()
            .enumerate()
            .map(|(slot, base)| {
                if !self.coupled[slot] {
                    return Ok(base.clone());
                }
                let spec = self.specs[slot]
                    .as_ref()
                    .expect("coupled slots always carry a distribution spec");
                Marginal::from_spec(spec, &resolve)
            })
            .collect::<Result<_>>()?;
        let block = AleatoryBlock::new(marginals);

        let mut seed = cfg.seed;
        for &p in points {
            seed = mix_seed(seed, p.to_bits());
        }
        let cfg = cfg.with_seed(seed);

        let ale = self.aleatory.clone();
        let response = &self.response;
        let model = move |x: &[f64]| {
            let mut values = template.clone();
            for (&qi, &xi) in ale.iter().zip(x) {
                values[qi] = xi;
            }
            response.eval(&values)
        };
        match event {
            EventSpec::Failure => {
                let est = chi_failure(model, &block, &cfg)?;
                Ok((est.p, est.std_error))
            }
            EventSpec::Expectation => {
                let est = chi_expectation(model, &block, &cfg)?;
                Ok((est.mean, est.std_error))
            }
        }
    }

}

// ---------------------------------------------------------------------------
// decode: unit-box coordinates -> admissible Dirac measures

/// Decode layout for one epistemic quantity: `2n − 1` unit coordinates,
/// where constrained orders map into the intersection of the constraint box
/// with the reachable moment interval and the rest are canonical
/// coordinates.
pub(crate) struct QuantityPlan {
    interval: (f64, f64),
    n_points: usize,
    dim: usize,
    by_order: Vec<Option<MomentConstraint>>,
    /// Constraints above order 2n − 1; the measure is fully determined
    /// before reaching them, so they can only be checked, not steered.
    extra: Vec<MomentConstraint>,
}

pub(crate) fn build_plans(problem: &UQProblem) -> Result<Vec<QuantityPlan>> {
    problem
        .quantities
        .iter()
        .filter(|q| q.is_epistemic())
        .map(|q| {
            let n_points = 1 + q.moment_constraints.len();
            let dim = 2 * n_points - 1;
            let mut by_order: Vec<Option<MomentConstraint>> = vec![None; dim];
            let mut extra = Vec::new();
            for c in &q.moment_constraints {
                let j = c.order as usize;
                if j >= 1 && j <= dim {
                    by_order[j - 1] = Some(c.clone());
                } else {
                    extra.push(c.clone());
                }
            }
            Ok(QuantityPlan {
                interval: (q.range.lower, q.range.upper),
                n_points,
                dim,
                by_order,
                extra,
            })
        })
        .collect()
}

pub(crate) fn decode_all(
    plans: &[QuantityPlan],
    x: &[f64],
) -> Result<(Vec<DiracMeasure>, f64)> {
    let mut measures = Vec::with_capacity(plans.len());
    let mut violation = 0.0;
    let mut offset = 0;
    for plan in plans {
        let coords = &x[offset..offset + plan.dim];
        offset += plan.dim;
        let (measure, v) = decode_one(plan, coords)?;
        measures.push(measure);
        violation += v;
    }
    Ok((measures, violation))
}

fn interior(p: f64) -> f64 {
    p.clamp(CANONICAL_CLAMP, 1.0 - CANONICAL_CLAMP)
}

/// Normalized raw moment of order `j` reached when the canonical coordinate
/// after `prefix` is set to `pj`.
fn probe_moment(prefix: &[f64], pj: f64, j: usize) -> Result<f64> {
    let mut p = Vec::with_capacity(prefix.len() + 1);
    p.extend(prefix.iter().map(|&v| interior(v)));
    p.push(interior(pj));
    Ok(canonical_to_moments(UNIT, &p)?[j - 1])
}

/// Target interval for the normalized raw moment of order `j` implied by a
/// constraint on the physical quantity, given the normalized moment prefix
/// c_1..c_{j−1}. Both classical and central constraints are affine in c_j
/// with unit slope once lower moments are fixed.
fn constraint_target(
    c: &MomentConstraint,
    a: f64,
    w: f64,
    prefix: &[f64],
) -> (f64, f64) {
    let j = c.order as usize;
    let wj = w.powi(j as i32);
    let moment = |i: usize| if i == 0 { 1.0 } else { prefix[i - 1] };
    match c.kind {
        MomentKind::Classical => {
            // E[y^j] = Σ_i C(j,i) a^(j−i) w^i c_i, linear in c_j with slope w^j
            let mut shift = 0.0;
            for i in 0..j {
                shift += binom(j, i) * a.powi((j - i) as i32) * w.powi(i as i32) * moment(i);
            }
            ((c.lower - shift) / wj, (c.upper - shift) / wj)
        }
        MomentKind::Central => {
            // central moments are translation-free and scale with w^j;
            // on the unit interval they are c_j plus a polynomial in the
            // lower moments
            let c1 = moment(1);
            let mut shift = 0.0;
            for i in 0..j {
                shift += binom(j, i) * moment(i) * (-c1).powi((j - i) as i32);
            }
            (c.lower / wj - shift, c.upper / wj - shift)
        }
    }
}

fn decode_one(plan: &QuantityPlan, coords: &[f64]) -> Result<(DiracMeasure, f64)> {
    let (a, b) = plan.interval;
    let w = b - a;
    let mut p: Vec<f64> = Vec::with_capacity(plan.dim);
    let mut violation = 0.0;
    for j in 1..=plan.dim {
        let slot = coords[j - 1].clamp(0.0, 1.0);
        match &plan.by_order[j - 1] {
            None => p.push(slot),
            Some(c) => {
                let m_lo = probe_moment(&p, 0.0, j)?;
                let m_hi = probe_moment(&p, 1.0, j)?;
                let prefix = if j  == 1 {
                    Vec::new()
                } else {
                    canonical_to_moments(
                        UNIT,
                        &p.iter().map(|&v| interior(v)).collect::<Vec<_>>(),
                    )?
                };
                let (t_lo, t_hi) = constraint_target(c, a, w, &prefix);
                let lo = t_lo.max(m_lo);
                let hi = t_hi.min(m_hi);
                let target = if lo <= hi {
                    lo + slot * (hi - lo)
                } else {
                    violation += lo - hi;
                    if t_hi < m_lo {
                        m_lo
                    } else {
                        m_hi
                    }
                };
                let span = m_hi - m_lo;
                let pj = if span > f64::MIN_POSITIVE {
                    ((target - m_lo) / span).clamp(0.0, 1.0)
                } else {
                    0.5
                };
                p.push(pj);
            }
        }
    }
    let measure = canonical_to_dirac(plan.interval, &p, plan.n_points)?;
    for c in &plan.extra {
        violation += single_constraint_violation(&measure, c)?;
    }
    Ok((measure, violation))
}

fn single_constraint_violation(measure: &DiracMeasure, c: &MomentConstraint) -> Result<f64> {
    let m = match c.kind {
        MomentKind::Classical => measure.classical_moment(c.order)?,
        MomentKind::Central => measure.central_moment(c.order)?,
    };
    let scale = c.lower.abs().max(c.upper.abs()).max(1.0);
    Ok(((c.lower - m).max(0.0) + (m - c.upper).max(0.0)) / scale)
}
