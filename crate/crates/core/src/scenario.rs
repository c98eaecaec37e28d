//! Scenario files: a TOML document describing an uncertainty model and,
//! optionally, a design layer on top of it. The built-in catalogue exposes
//! the column benchmark variants and a few small synthetic problems; a
//! built-in rendered to a file and loaded back describes the identical
//! problem, so nothing is reachable from code that is not reachable from a
//! file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::benchmark::{column_design_problem, EnvironmentalLoad};
use crate::error::{Error, Result};
use crate::model::{
    DistributionSpec, EventSpec, MomentConstraint, ResponseSpec, UQProblem, UncertainQuantity,
};
use crate::rbdo::{
    Coupling, CostSpec, DesignProblem, DesignVariable, Direction, ReliabilitySpec,
};

/// One scenario document. Scalar keys first so the rendered TOML stays
/// readable: tables for quantities, response, and design follow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub event: EventSpec,
    #[serde(rename = "quantity")]
    pub quantities: Vec<UncertainQuantity>,
    pub response: ResponseSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignSection>,
}

/// Design layer of a scenario: variables, cost, and the admissible failure
/// probability. The uncertainty model it constrains is the scenario's own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSection {
    pub direction: Direction,
    pub p_adm: f64,
    pub cost: CostSpec,
    #[serde(rename = "variable")]
    pub variables: Vec<DesignVariable>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ScenarioParse(e.to_string()))
    }

    pub fn render(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::ScenarioRender(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::ScenarioParse(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    /// The bare uncertainty problem, for bound computations.
    pub fn uq_problem(&self) -> UQProblem {
        UQProblem {
            quantities: self.quantities.clone(),
            response: self.response.clone(),
            event: self.event,
        }
    }

    /// The design problem, when the scenario carries a design layer.
    pub fn design_problem(&self) -> Option<DesignProblem> {
        self.design.as_ref().map(|d| DesignProblem {
            variables: d.variables.clone(),
            cost: d.cost.clone(),
            reliability: ReliabilitySpec { problem: self.uq_problem(), p_adm: d.p_adm },
            direction: d.direction,
        })
    }

    /// Wrap a design problem as a scenario document (the inverse of
    /// [`Scenario::design_problem`]).
    pub fn from_design(name: &str, description: &str, problem: &DesignProblem) -> Self {
        Scenario {
            name: name.into(),
            description: description.into(),
            event: problem.reliability.problem.event,
            quantities: problem.reliability.problem.quantities.clone(),
            response: problem.reliability.problem.response.clone(),
            design: Some(DesignSection {
                direction: problem.direction,
                p_adm: problem.reliability.p_adm,
                cost: problem.cost.clone(),
                variables: problem.variables.clone(),
            }),
        }
    }

    /// Names of the built-in scenarios, sorted.
    pub fn builtin_names() -> &'static [&'static str] {
        BUILTIN_NAMES
    }

    pub fn builtin(name: &str) -> Option<Scenario> {
        match name {
            "gaussian_margin" => Some(gaussian_margin()),
            "ouq_e_range_0_1000" => Some(column_scenario(
                "ouq_e_range_0_1000",
                "column sizing, environmental load known through mean and two central moments on [0, 1000] kN",
                EnvironmentalLoad::MomentBox0To1000,
            )),
            "ouq_e_range_100_500" => Some(column_scenario(
                "ouq_e_range_100_500",
                "column sizing, environmental load known through mean and two central moments on [100, 500] kN",
                EnvironmentalLoad::MomentBox100To500,
            )),
            "ouq_g" => Some(column_scenario(
                "ouq_g",
                "column sizing, environmental load Gumbel with interval-and-mean-bounded location and scale",
                EnvironmentalLoad::GumbelFamily,
            )),
            "toy_coupled_design" => Some(toy_coupled_design()),
            "toy_interval_threshold" => Some(toy_interval_threshold()),
            "toy_mean_bound" => Some(toy_mean_bound()),
            _ => None,
        }
    }
}

const BUILTIN_NAMES: &[&str] = &[
    "gaussian_margin",
    "ouq_e_range_0_1000",
    "ouq_e_range_100_500",
    "ouq_g",
    "toy_coupled_design",
    "toy_interval_threshold",
    "toy_mean_bound",
];

fn column_scenario(name: &str, description: &str, load: EnvironmentalLoad) -> Scenario {
    Scenario::from_design(name, description, &column_design_problem(load))
}

/// g = 2 − ẑ with ẑ standard normal: no epistemic freedom, so both bounds
/// equal Φ(−2).
fn gaussian_margin() -> Scenario {
    Scenario {
        name: "gaussian_margin".into(),
        description: "linear Gaussian margin; failure probability is exactly the two-sigma tail"
            .into(),
        event: EventSpec::Failure,
        quantities: vec![UncertainQuantity::aleatory(
            "z",
            -10.0,
            10.0,
            DistributionSpec::Normal { mean: 0.0.into(), sd: 1.0.into() },
        )],
        response: ResponseSpec::affine(&["z"], vec![-1.0], 2.0),
        design: None,
    }
}

/// g = y − 1/2 with y only known to live in [0, 1]: the bounds are the
/// trivial 0 and 1.
fn toy_interval_threshold() -> Scenario {
    Scenario {
        name: "toy_interval_threshold".into(),
        description: "threshold crossing of a pure interval quantity; bounds are vacuous".into(),
        event: EventSpec::Failure,
        quantities: vec![UncertainQuantity::epistemic("y", 0.0, 1.0)],
        response: ResponseSpec::affine(&["y"], vec![1.0], -0.5),
        design: None,
    }
}

/// g = y − 1/2 with y in [0, 1] and E[y] pinned to 0.7: the sharpest upper
/// bound is 3/5, attained by the two-point measure on {1/2, 1}.
fn toy_mean_bound() -> Scenario {
    Scenario {
        name: "toy_mean_bound".into(),
        description: "threshold crossing with a pinned mean; upper bound is 3/5".into(),
        event: EventSpec::Failure,
        quantities: vec![UncertainQuantity::epistemic("y", 0.0, 1.0)
            .with_constraint(MomentConstraint::classical(1, 0.7, 0.7))],
        response: ResponseSpec::affine(&["y"], vec![1.0], -0.5),
        design: None,
    }
}

/// Minimize θ subject to a reliability constraint whose feasibility
/// threshold is Φ(0.1 − 2θ): the exact optimum for P_adm = Φ(−3) is 1.55.
fn toy_coupled_design() -> Scenario {
    let y = UncertainQuantity::epistemic("y", 0.0, 3.0);
    let z = UncertainQuantity::aleatory(
        "z",
        -10.0,
        10.0,
        DistributionSpec::Normal { mean: 0.0.into(), sd: 1.0.into() },
    );
    Scenario {
        name: "toy_coupled_design".into(),
        description:
            "one design variable steering an interval midpoint; optimum sits where the \
             worst-case tail meets the admissible probability"
                .into(),
        event: EventSpec::Failure,
        quantities: vec![y, z],
        response: ResponseSpec::named("coupled_margin", &["y", "z"]),
        design: Some(DesignSection {
            direction: Direction::Minimize,
            p_adm: 0.0013498980316300945,
            cost: CostSpec::Deterministic { function: "first_theta".into() },
            variables: vec![DesignVariable::continuous("t", 0.5, 2.0).with_coupling(
                Coupling::IntervalMidpoint { quantity: "y".into(), width: 0.2 },
            )],
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_names_are_sorted_and_resolve() {
        let names = Scenario::builtin_names();
        let mut sorted = names.to_vec();
        sorted.sort_unstable();
        assert_eq!(names, sorted.as_slice());
        assert_eq!(names.len(), 7);
        for name in names {
            let s = Scenario::builtin(name).expect(name);
            assert_eq!(&s.name, name);
        }
        assert!(Scenario::builtin("missing").is_none());
    }

    #[test]
    fn every_builtin_renders_and_parses_back_identically() {
        for name in Scenario::builtin_names() {
            let original = Scenario::builtin(name).unwrap();
            let text = original.render().unwrap();
            let reparsed = Scenario::parse(&text).unwrap_or_else(|e| {
                panic!("{name}: {e}\n---\n{text}");
            });
            assert_eq!(reparsed, original, "{name} drifted through TOML:\n{text}");
        }
    }

    #[test]
    fn every_builtin_validates() {
        for name in Scenario::builtin_names() {
            let s = Scenario::builtin(name).unwrap();
            match s.design_problem() {
                Some(d) => {
                    let diags = crate::rbdo::validate_design(&d);
                    assert!(diags.is_empty(), "{name}: {diags:?}");
                }
                None => {
                    let diags = crate::model::validate(&s.uq_problem());
                    assert!(diags.is_empty(), "{name}: {diags:?}");
                }
            }
        }
    }

    #[test]
    fn benchmark_scenarios_carry_their_design_layer() {
        for name in ["ouq_g", "ouq_e_range_100_500", "ouq_e_range_0_1000"] {
            let s = Scenario::builtin(name).unwrap();
            let d = s.design_problem().expect("design layer");
            assert_eq!(d.reliability.p_adm, 1.3e-6);
            assert_eq!(
                d.reliability.problem,
                crate::benchmark::column_uq_problem(match name {
                    "ouq_g" => EnvironmentalLoad::GumbelFamily,
                    "ouq_e_range_100_500" => EnvironmentalLoad::MomentBox100To500,
                    _ => EnvironmentalLoad::MomentBox0To1000,
                })
            );
        }
    }

    #[test]
    fn hand_written_document_parses() {
        let text = r#"
            name = "inline"
            event = "failure"

            [[quantity]]
            name = "load"
            range = [0.0, 10.0]
            classification = "epistemic"

            [[quantity.moment]]
            order = 1
            kind = "classical"
            lower = 4.0
            upper = 6.0

            [[quantity]]
            name = "noise"
            range = [-8.0, 8.0]
            classification = "aleatory"
            distribution = { family = "normal", mean = 0.0, sd = 1.0 }

            [response]
            inputs = ["load", "noise"]
            [response.affine]
            coeffs = [-1.0, -1.0]
            offset = 12.0
        "#;
        let s = Scenario::parse(text).unwrap();
        assert_eq!(s.quantities.len(), 2);
        assert_eq!(s.quantities[0].moment_constraints[0].upper, 6.0);
        assert!(s.design.is_none());
        assert!(crate::model::validate(&s.uq_problem()).is_empty());
    }

    #[test]
    fn parse_failures_carry_context() {
        let err = Scenario::parse("name = [").unwrap_err();
        assert!(matches!(err, Error::ScenarioParse(_)));
        let err = Scenario::load(Path::new("/nonexistent/scenario.toml")).unwrap_err();
        let Error::ScenarioParse(msg) = err else { panic!("wrong variant") };
        assert!(msg.contains("/nonexistent/scenario.toml"));
    }

    #[test]
    fn round_trip_through_a_file_preserves_the_design_problem() {
        let original = Scenario::builtin("ouq_g").unwrap();
        let dir = std::env::temp_dir().join("scenario_round_trip_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ouq_g.toml");
        std::fs::write(&path, original.render().unwrap()).unwrap();
        let loaded = Scenario::load(&path).unwrap();
        assert_eq!(loaded.design_problem(), original.design_problem());
        std::fs::remove_file(&path).ok();
    }
}
