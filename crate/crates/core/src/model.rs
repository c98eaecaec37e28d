//! Data model for uncertainty descriptions.
//!
//! A [`UQProblem`] couples a list of [`UncertainQuantity`] entries with a
//! scalar response and an event. Epistemic quantities carry an interval and
//! optional moment constraints; aleatory quantities carry a distribution
//! whose parameters are either fixed numbers or references to epistemic
//! quantities declared in the same problem. All values are plain reals; the
//! scenario document states the units.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Closed interval with `lower < upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 2]", try_from = "[f64; 2]")]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::InvalidArgument(format!(
                "interval requires finite lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lower, i.upper]
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = String;
    fn try_from(v: [f64; 2]) -> std::result::Result<Self, String> {
        Interval::new(v[0], v[1]).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    /// E[y^b]
    Classical,
    /// E[(y - E[y])^b]
    Central,
}

/// Interval bound on one moment of an epistemic quantity. A precise moment is
/// the degenerate case `lower == upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentConstraint {
    pub order: u32,
    pub kind: MomentKind,
    pub lower: f64,
    pub upper: f64,
}

impl MomentConstraint {
    pub fn classical(order: u32, lower: f64, upper: f64) -> Self {
        Self { order, kind: MomentKind::Classical, lower, upper }
    }

    pub fn central(order: u32, lower: f64, upper: f64) -> Self {
        Self { order, kind: MomentKind::Central, lower, upper }
    }

    pub fn is_precise(&self) -> bool {
        self.lower == self.upper
    }
}

/// Distribution parameter: a fixed number, or the name of an epistemic
/// quantity supplying the value at evaluation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Fixed(f64),
    Ref {
        #[serde(rename = "ref")]
        name: String,
    },
}

impl Param {
    pub fn reference(name: &str) -> Self {
        Param::Ref { name: name.to_string() }
    }

    pub fn as_ref_name(&self) -> Option<&str> {
        match self {
            Param::Fixed(_) => None,
            Param::Ref { name } => Some(name),
        }
    }
}

impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Param::Fixed(v)
    }
}

/// Parametric distribution family. Lognormal and normal take the mean and
/// standard deviation of the physical quantity; gumbel is the maximum
/// (type I) form with CDF `exp(-exp(-(x-location)/scale))`; beta is shaped on
/// `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionSpec {
    Lognormal { mean: Param, sd: Param },
    Gumbel { location: Param, scale: Param },
    Beta { shape1: Param, shape2: Param, lower: Param, upper: Param },
    Normal { mean: Param, sd: Param },
    Uniform { lower: Param, upper: Param },
}

impl DistributionSpec {
    pub fn family_name(&self) -> &'static str {
        match self {
            DistributionSpec::Lognormal { .. } => "lognormal",
            DistributionSpec::Gumbel { .. } => "gumbel",
            DistributionSpec::Beta { .. } => "beta",
            DistributionSpec::Normal { .. } => "normal",
            DistributionSpec::Uniform { .. } => "uniform",
        }
    }

    pub fn params(&self) -> Vec<(&'static str, &Param)> {
        match self {
            DistributionSpec::Lognormal { mean, sd } => vec![("mean", mean), ("sd", sd)],
            DistributionSpec::Gumbel { location, scale } => {
                vec![("location", location), ("scale", scale)]
            }
            DistributionSpec::Beta { shape1, shape2, lower, upper } => vec![
                ("shape1", shape1),
                ("shape2", shape2),
                ("lower", lower),
                ("upper", upper),
            ],
            DistributionSpec::Normal { mean, sd } => vec![("mean", mean), ("sd", sd)],
            DistributionSpec::Uniform { lower, upper } => {
                vec![("lower", lower), ("upper", upper)]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Epistemic,
    Aleatory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertainQuantity {
    pub name: String,
    pub range: Interval,
    pub classification: Classification,
    #[serde(default, rename = "moment", skip_serializing_if = "Vec::is_empty")]
    pub moment_constraints: Vec<MomentConstraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionSpec>,
}

impl UncertainQuantity {
    /// Interval-only epistemic quantity.
    pub fn epistemic(name: &str, lower: f64, upper: f64) -> Self {
        Self {
            name: name.to_string(),
            range: Interval { lower, upper },
            classification: Classification::Epistemic,
            moment_constraints: Vec::new(),
            distribution: None,
        }
    }

    pub fn aleatory(name: &str, lower: f64, upper: f64, dist: DistributionSpec) -> Self {
        Self {
            name: name.to_string(),
            range: Interval { lower, upper },
            classification: Classification::Aleatory,
            moment_constraints: Vec::new(),
            distribution: Some(dist),
        }
    }

    pub fn with_constraint(mut self, c: MomentConstraint) -> Self {
        self.moment_constraints.push(c);
        self
    }

    pub fn is_epistemic(&self) -> bool {
        self.classification == Classification::Epistemic
    }
}

/// Number of support points of the reduced (discrete) measure for an
/// epistemic quantity: one, plus one per moment constraint.
pub fn dirac_term_count(q: &UncertainQuantity) -> Result<usize> {
    if !q.is_epistemic() {
        return Err(Error::InvalidArgument(format!(
            "dirac_term_count applies to epistemic quantities; `{}` is aleatory",
            q.name
        )));
    }
    Ok(1 + q.moment_constraints.len())
}

/// Scalar response referenced by a problem. `inputs` projects the full
/// quantity vector (problem declaration order) onto the response arguments by
/// name; `theta` carries design parameters bound by a driver, empty for pure
/// uncertainty problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSpec {
    pub inputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub theta: Vec<f64>,
    #[serde(flatten)]
    pub form: ResponseForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseForm {
    /// Function registered under `name`, called as `f(theta, inputs)`.
    Named { name: String },
    /// `offset + coeffs . inputs`, for synthetic scenarios.
    Affine { coeffs: Vec<f64>, offset: f64 },
}

impl ResponseSpec {
    pub fn named(name: &str, inputs: &[&str]) -> Self {
        Self {
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            theta: Vec::new(),
            form: ResponseForm::Named { name: name.to_string() },
        }
    }

    pub fn affine(inputs: &[&str], coeffs: Vec<f64>, offset: f64) -> Self {
        Self {
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            theta: Vec::new(),
            form: ResponseForm::Affine { coeffs, offset },
        }
    }
}

/// Event the problem asks about: probability of `g <= 0`, or the expectation
/// of the response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventSpec {
    Failure,
    Expectation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UQProblem {
    #[serde(rename = "quantity")]
    pub quantities: Vec<UncertainQuantity>,
    pub response: ResponseSpec,
    pub event: EventSpec,
}

impl UQProblem {
    pub fn quantity_index(&self, name: &str) -> Option<usize> {
        self.quantities.iter().position(|q| q.name == name)
    }

    pub fn quantity(&self, name: &str) -> Option<&UncertainQuantity> {
        self.quantities.iter().find(|q| q.name == name)
    }

    pub fn epistemic_indices(&self) -> Vec<usize> {
        self.quantities
            .iter()
            .enumerate()
            .filter(|(_, q)| q.is_epistemic())
            .map(|(i, _)| i)
            .collect()
    }
}

/// One validation finding. Validation never fails hard; solvers reject
/// problems whose diagnostics list is non-empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub quantity: Option<String>,
    pub message: String,
}

impl Diagnostic {
    fn new(quantity: Option<&str>, message: String) -> Self {
        Self { quantity: quantity.map(|s| s.to_string()), message }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.quantity {
            Some(q) => write!(f, "[{q}] {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

/// Structural and consistency checks of a problem description. Returns all
/// findings instead of stopping at the first.
pub fn validate(problem: &UQProblem) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if problem.quantities.is_empty() {
        out.push(Diagnostic::new(None, "problem declares no quantities".into()));
    }

    for (i, q) in problem.quantities.iter().enumerate() {
        let name = Some(q.name.as_str());
        if q.name.is_empty() {
            out.push(Diagnostic::new(None, format!("quantity #{i} has an empty name")));
        }
        if problem.quantities[..i].iter().any(|p| p.name == q.name) {
            out.push(Diagnostic::new(name, "duplicate quantity name".into()));
        }
        let r = q.range;
        if !(r.lower.is_finite() && r.upper.is_finite() && r.lower < r.upper) {
            out.push(Diagnostic::new(
                name,
                format!("range [{}, {}] must be finite with lower < upper", r.lower, r.upper),
            ));
            continue;
        }
        validate_constraints(q, &mut out);
        match (q.classification, &q.distribution) {
            (Classification::Aleatory, None) => {
                out.push(Diagnostic::new(name, "aleatory quantity needs a distribution".into()))
            }
            (Classification::Epistemic, Some(_)) => out.push(Diagnostic::new(
                name,
                "epistemic quantity must not carry a distribution".into(),
            )),
            (Classification::Aleatory, Some(dist)) => {
                validate_distribution(problem, q, dist, &mut out)
            }
            (Classification::Epistemic, None) => {}
        }
    }

    validate_response(problem, &mut out);
    out
}

fn validate_constraints(q: &UncertainQuantity, out: &mut Vec<Diagnostic>) {
    let name = Some(q.name.as_str());
    if !q.is_epistemic() && !q.moment_constraints.is_empty() {
        out.push(Diagnostic::new(
            name,
            "moment constraints apply to epistemic quantities only".into(),
        ));
        return;
    }
    let w = q.range.width();
    for c in &q.moment_constraints {
        let label = format!("{:?} moment of order {}", c.kind, c.order).to_lowercase();
        if c.order == 0 {
            out.push(Diagnostic::new(name, "moment constraint order must be >= 1".into()));
            continue;
        }
        if !(c.lower.is_finite() && c.upper.is_finite() && c.lower <= c.upper) {
            out.push(Diagnostic::new(
                name,
                format!("{label}: bounds [{}, {}] must be finite with lower <= upper", c.lower, c.upper),
            ));
            continue;
        }
        if q.moment_constraints.iter().filter(|o| o.order == c.order).count() > 1 {
            out.push(Diagnostic::new(name, format!("duplicate constraint at order {}", c.order)));
        }
        match c.kind {
            MomentKind::Classical => {
                // E[y^b] lives in the convex hull of x^b over the range.
                let (a, b) = (q.range.lower, q.range.upper);
                let vals = [a.powi(c.order as i32), b.powi(c.order as i32)];
                let mut lo = vals[0].min(vals[1]);
                let mut hi = vals[0].max(vals[1]);
                if c.order % 2 == 0 && a < 0.0 && b > 0.0 {
                    lo = 0.0;
                    hi = a.abs().max(b).powi(c.order as i32);
                }
                if c.upper < lo || c.lower > hi {
                    out.push(Diagnostic::new(
                        name,
                        format!("{label}: bounds [{}, {}] unreachable on range [{a}, {b}]", c.lower, c.upper),
                    ));
                } else if c.order == 1 && (c.lower < a || c.upper > b) {
                    out.push(Diagnostic::new(
                        name,
                        format!("mean bounds [{}, {}] extend outside range [{a}, {b}]", c.lower, c.upper),
                    ));
                }
            }
            MomentKind::Central => {
                if c.order == 1 {
                    out.push(Diagnostic::new(
                        name,
                        "central moment of order 1 is identically zero; constrain the mean instead".into(),
                    ));
                } else if c.order == 2 {
                    let max_var = w * w / 4.0;
                    if c.upper < 0.0 || c.lower > max_var {
                        out.push(Diagnostic::new(
                            name,
                            format!("variance bounds [{}, {}] unreachable; max on this range is {max_var}", c.lower, c.upper),
                        ));
                    }
                } else {
                    let cap = w.powi(c.order as i32);
                    if c.lower.abs() > cap || c.upper.abs() > cap {
                        out.push(Diagnostic::new(
                            name,
                            format!("{label}: bounds exceed range-width^{} = {cap}", c.order),
                        ));
                    }
                }
            }
        }
    }
}

fn validate_distribution(
    problem: &UQProblem,
    q: &UncertainQuantity,
    dist: &DistributionSpec,
    out: &mut Vec<Diagnostic>,
) {
    let name = Some(q.name.as_str());
    for (pname, param) in dist.params() {
        match param {
            Param::Fixed(v) => {
                if !v.is_finite() {
                    out.push(Diagnostic::new(name, format!("parameter `{pname}` is not finite")));
                    continue;
                }
                let positive_required = matches!(
                    (dist.family_name(), pname),
                    ("lognormal", _) | ("gumbel", "scale") | ("normal", "sd") | ("beta", "shape1") | ("beta", "shape2")
                );
                if positive_required && *v <= 0.0 {
                    out.push(Diagnostic::new(
                        name,
                        format!("parameter `{pname}` of {} must be positive, got {v}", dist.family_name()),
                    ));
                }
            }
            Param::Ref { name: target } => match problem.quantity(target) {
                None => out.push(Diagnostic::new(
                    name,
                    format!("parameter `{pname}` references unknown quantity `{target}`"),
                )),
                Some(t) if !t.is_epistemic() => out.push(Diagnostic::new(
                    name,
                    format!("parameter `{pname}` must reference an epistemic quantity, `{target}` is aleatory"),
                )),
                Some(_) => {}
            },
        }
    }
    if let DistributionSpec::Uniform { lower: Param::Fixed(a), upper: Param::Fixed(b) } = dist {
        if a >= b {
            out.push(Diagnostic::new(name, format!("uniform bounds [{a}, {b}] need lower < upper")));
        }
    }
    if let DistributionSpec::Beta { lower: Param::Fixed(a), upper: Param::Fixed(b), .. } = dist {
        if a >= b {
            out.push(Diagnostic::new(name, format!("beta bounds [{a}, {b}] need lower < upper")));
        }
    }
}

fn validate_response(problem: &UQProblem, out: &mut Vec<Diagnostic>) {
    let resp = &problem.response;
    for input in &resp.inputs {
        if problem.quantity_index(input).is_none() {
            out.push(Diagnostic::new(
                None,
                format!("response input `{input}` does not name a declared quantity"),
            ));
        }
    }
    let mut seen = std::collections::HashSet::new();
    for input in &resp.inputs {
        if !seen.insert(input) {
            out.push(Diagnostic::new(None, format!("response input `{input}` listed twice")));
        }
    }
    if let ResponseForm::Affine { coeffs, .. } = &resp.form {
        if coeffs.len() != resp.inputs.len() {
            out.push(Diagnostic::new(
                None,
                format!(
                    "affine response has {} coefficients for {} inputs",
                    coeffs.len(),
                    resp.inputs.len()
                ),
            ));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_problem() -> UQProblem {
        UQProblem {
            quantities: vec![UncertainQuantity::epistemic("y", 0.0, 1.0)],
            response: ResponseSpec::affine(&["y"], vec![1.0], -0.5),
            event: EventSpec::Failure,
        }
    }

    #[test]
    fn clean_problem_has_no_diagnostics() {
        assert!(validate(&toy_problem()).is_empty());
    }

    #[test]
    fn term_count_is_one_plus_constraints() {
        let q = UncertainQuantity::epistemic("y", 0.0, 1.0);
        assert_eq!(dirac_term_count(&q).unwrap(), 1);
        let q = q.with_constraint(MomentConstraint::classical(1, 0.4, 0.6));
        assert_eq!(dirac_term_count(&q).unwrap(), 2);
        let q = UncertainQuantity {
            name: "pe".into(),
            range: Interval { lower: 0.0, upper: 1000.0 },
            classification: Classification::Epistemic,
            moment_constraints: vec![
                MomentConstraint::classical(1, 209.4, 279.0),
                MomentConstraint::central(2, 2251.91, 9007.66),
                MomentConstraint::central(3, 121775.0, 974204.0),
            ],
            distribution: None,
        };
        assert_eq!(dirac_term_count(&q).unwrap(), 4);
    }

    #[test]
    fn term_count_rejects_aleatory() {
        let q = UncertainQuantity::aleatory(
            "z",
            -8.0,
            8.0,
            DistributionSpec::Normal { mean: 0.0.into(), sd: 1.0.into() },
        );
        assert!(dirac_term_count(&q).is_err());
    }

    #[test]
    fn mean_bound_outside_range_is_diagnosed() {
        let mut p = toy_problem();
        p.quantities[0]
            .moment_constraints
            .push(MomentConstraint::classical(1, 0.8, 1.2));
        let diags = validate(&p);
        assert!(diags.iter().any(|d| d.message.contains("outside range")), "{diags:?}");
    }

    #[test]
    fn unreachable_mean_bound_is_diagnosed() {
        let mut p = toy_problem();
        p.quantities[0]
            .moment_constraints
            .push(MomentConstraint::classical(1, 1.5, 2.0));
        let diags = validate(&p);
        assert!(diags.iter().any(|d| d.message.contains("unreachable")), "{diags:?}");
    }

    #[test]
    fn duplicate_names_are_diagnosed() {
        let mut p = toy_problem();
        p.quantities.push(UncertainQuantity::epistemic("y", 0.0, 2.0));
        let diags = validate(&p);
        assert!(diags.iter().any(|d| d.message.contains("duplicate quantity name")));
    }

    #[test]
    fn aleatory_without_distribution_is_diagnosed() {
        let mut p = toy_problem();
        p.quantities[0].classification = Classification::Aleatory;
        let diags = validate(&p);
        assert!(diags.iter().any(|d| d.message.contains("needs a distribution")));
    }

    #[test]
    fn aleatory_with_moment_constraints_is_diagnosed() {
        let mut p = toy_problem();
        p.quantities[0] = UncertainQuantity::aleatory(
            "y",
            0.0,
            1.0,
            DistributionSpec::Uniform { lower: 0.0.into(), upper: 1.0.into() },
        )
        .with_constraint(MomentConstraint::classical(1, 0.4, 0.6));
        let diags = validate(&p);
        assert!(diags.iter().any(|d| d.message.contains("epistemic quantities only")));
    }

    #[test]
    fn dangling_parameter_reference_is_diagnosed() {
        let mut p = toy_problem();
        p.quantities[0] = UncertainQuantity::aleatory(
            "y",
            0.0,
            1.0,
            DistributionSpec::Gumbel {
                location: Param::reference("nope"),
                scale: 1.0.into(),
            },
        );
        let diags = validate(&p);
        assert!(diags.iter().any(|d| d.message.contains("unknown quantity `nope`")));
    }

    #[test]
    fn response_input_must_exist() {
        let mut p = toy_problem();
        p.response = ResponseSpec::affine(&["ghost"], vec![1.0], 0.0);
        let diags = validate(&p);
        assert!(diags.iter().any(|d| d.message.contains("`ghost`")));
    }

    #[test]
    fn affine_coefficient_arity_checked() {
        let mut p = toy_problem();
        p.response = ResponseSpec::affine(&["y"], vec![1.0, 2.0], 0.0);
        let diags = validate(&p);
        assert!(diags.iter().any(|d| d.message.contains("coefficients")));
    }

    #[test]
    fn variance_bound_above_maximum_is_diagnosed() {
        let mut p = toy_problem();
        p.quantities[0]
            .moment_constraints
            .push(MomentConstraint::central(2, 0.3, 0.4));
        let diags = validate(&p);
        assert!(diags.iter().any(|d| d.message.contains("variance")), "{diags:?}");
    }
}
