//! Buckling-column design benchmark: a thin-walled square column under
//! permanent and environmental compression loads, sized against yield plus
//! second-order bending with an Euler buckling pole.
//!
//! Everything here works in a consistent N / mm / MPa unit system; scenario
//! constructors convert the original kN and m data at build time. The
//! design variable is the flange width `b`; the section height is tied to it
//! (`h = b`).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{
    DistributionSpec, EventSpec, MomentConstraint, Param, ResponseSpec, UQProblem,
    UncertainQuantity,
};
use crate::rbdo::{CostSpec, DesignProblem, DesignVariable, Direction, ReliabilitySpec};

/// Flange thickness t_b in mm.
pub const FLANGE_THICKNESS_MM: f64 = 15.0;
/// Web thickness t_h in mm.
pub const WEB_THICKNESS_MM: f64 = 10.0;
/// Column length L in mm.
pub const COLUMN_LENGTH_MM: f64 = 7500.0;
/// Buckling load prefactor: P_b = BUCKLING_COEFFICIENT · E · I / L².
/// This is the pinned–pinned Euler case; other support conditions amount to
/// changing this single constant.
pub const BUCKLING_COEFFICIENT: f64 = PI * PI;
/// Limit-state value returned once the load reaches the buckling pole:
/// certain failure, expressed as a large negative number rather than an
/// exception so estimators keep working.
pub const CERTAIN_FAILURE: f64 = -1e6;

/// Square cross-section, parameterized by the flange width in mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionGeometry {
    pub b: f64,
}

impl SectionGeometry {
    pub fn new(b: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "flange width must be positive and finite, got {b}"
            )));
        }
        Ok(Self { b })
    }

    /// Section height; the aspect ratio is fixed at b/h = 1.
    pub fn h(&self) -> f64 {
        self.b
    }
}

/// Derived section quantities in mm², mm³, mm⁴.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionProperties {
    pub area: f64,
    pub section_modulus: f64,
    pub second_moment: f64,
}

pub fn section_properties(geom: &SectionGeometry) -> SectionProperties {
    let b = geom.b;
    let h = geom.h();
    let (tb, th) = (FLANGE_THICKNESS_MM, WEB_THICKNESS_MM);
    SectionProperties {
        area: 2.0 * b * tb + h * th,
        section_modulus: h * th.powi(3) / (6.0 * b) + b * b * tb / 3.0,
        second_moment: h * th.powi(3) / 12.0 + b.powi(3) * tb / 6.0,
    }
}

/// Physical inputs of the limit state. Loads in N, deflection in mm,
/// strengths and stiffness in MPa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnState {
    pub p_p: f64,
    pub p_e: f64,
    pub delta_0: f64,
    pub y_0: f64,
    pub e_modulus: f64,
}

/// g = 1 − (P/(y0·A) + P·δ0/(y0·W) · P_b/(P_b − P)) with P = P_p + P_e and
/// P_b the Euler buckling load. Negative values mean failure; loads at or
/// past the buckling pole return [`CERTAIN_FAILURE`].
pub fn limit_state(geom: &SectionGeometry, state: &ColumnState) -> f64 {
    let props = section_properties(geom);
    let p = state.p_p + state.p_e;
    let p_b = BUCKLING_COEFFICIENT * state.e_modulus * props.second_moment
        / (COLUMN_LENGTH_MM * COLUMN_LENGTH_MM);
    if p >= p_b {
        return CERTAIN_FAILURE;
    }
    let stress = p / (state.y_0 * props.area);
    let bending = p * state.delta_0 / (state.y_0 * props.section_modulus) * p_b / (p_b - p);
    1.0 - (stress + bending)
}

/// Registry adapter: theta = [b in mm], inputs = [P_p, P_e, delta_0, y_0, E]
/// in N / N / mm / MPa / MPa.
pub fn column_limit_state(theta: &[f64], inputs: &[f64]) -> f64 {
    if theta.is_empty() || inputs.len() < 5 {
        return f64::NAN;
    }
    let Ok(geom) = SectionGeometry::new(theta[0]) else {
        return f64::NAN;
    };
    let state = ColumnState {
        p_p: inputs[0],
        p_e: inputs[1],
        delta_0: inputs[2],
        y_0: inputs[3],
        e_modulus: inputs[4],
    };
    limit_state(&geom, &state)
}

/// Registry adapter: cross-section area as a deterministic cost, theta = [b].
pub fn column_area(theta: &[f64], _inputs: &[f64]) -> f64 {
    match SectionGeometry::new(*theta.first().unwrap_or(&f64::NAN)) {
        Ok(geom) => section_properties(&geom).area,
        Err(_) => f64::NAN,
    }
}

/// Admissible failure probability for the column design scenarios.
pub const ADMISSIBLE_POF: f64 = 1.3e-6;
/// Flange-width design domain in mm. The upper failure-probability bound is
/// monotone decreasing in b across this domain, which is what lets the outer
/// loop bisect.
pub const WIDTH_DOMAIN_MM: (f64, f64) = (250.0, 400.0);

// unit conversions applied once, at scenario construction
const KN: f64 = 1e3; // kN → N
const KN2: f64 = 1e6; // kN² → N²
const KN3: f64 = 1e9; // kN³ → N³
const M: f64 = 1e3; // m → mm

/// How the environmental load P_e is described. The three variants share
/// every other quantity and differ only in the knowledge encoded about P_e.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvironmentalLoad {
    /// Gumbel (maximum) family with epistemic location and scale: both carry
    /// an interval and a mean bound of their own.
    GumbelFamily,
    /// Distribution-free on [100, 500] kN with bounds on the mean and the
    /// second and third central moments.
    MomentBox100To500,
    /// Same moment bounds on the wider support [0, 1000] kN.
    MomentBox0To1000,
}

fn environmental_quantities(load: EnvironmentalLoad) -> Vec<UncertainQuantity> {
    // mean / central-moment data in kN^k, converted to the N-based system
    let moment_boxed = |lower_kn: f64, upper_kn: f64| {
        UncertainQuantity::epistemic("P_e", lower_kn * KN, upper_kn * KN)
            .with_constraint(MomentConstraint::classical(1, 209.4 * KN, 279.0 * KN))
            .with_constraint(MomentConstraint::central(2, 2251.91 * KN2, 9007.66 * KN2))
            .with_constraint(MomentConstraint::central(3, 121_775.0 * KN3, 974_204.0 * KN3))
    };
    match load {
        EnvironmentalLoad::GumbelFamily => vec![
            UncertainQuantity::aleatory(
                "P_e",
                -1e6,
                5e6,
                DistributionSpec::Gumbel {
                    location: Param::reference("a_e"),
                    scale: Param::reference("b_e"),
                },
            ),
            UncertainQuantity::epistemic("a_e", 188.0 * KN, 236.0 * KN)
                .with_constraint(MomentConstraint::classical(1, 201.4 * KN, 222.6 * KN)),
            UncertainQuantity::epistemic("b_e", 37.0 * KN, 74.0 * KN)
                .with_constraint(MomentConstraint::classical(1, 49.685 * KN, 54.915 * KN)),
        ],
        EnvironmentalLoad::MomentBox100To500 => vec![moment_boxed(100.0, 500.0)],
        EnvironmentalLoad::MomentBox0To1000 => vec![moment_boxed(0.0, 1000.0)],
    }
}

/// Uncertainty model of the column: permanent load and initial deflection as
/// intervals, yield strength and Young's modulus lognormal, and the
/// environmental load per the chosen variant. Aleatory ranges are
/// descriptive; sampling follows the distributions.
pub fn column_uq_problem(load: EnvironmentalLoad) -> UQProblem {
    let mut quantities = vec![
        UncertainQuantity::epistemic("P_p", 100.0 * KN, 200.0 * KN),
        UncertainQuantity::epistemic("delta_0", 0.0, 0.06 * M),
        UncertainQuantity::aleatory(
            "y_0",
            100.0,
            1000.0,
            DistributionSpec::Lognormal { mean: 400.0.into(), sd: 32.0.into() },
        ),
        UncertainQuantity::aleatory(
            "E",
            1e5,
            4e5,
            DistributionSpec::Lognormal { mean: 210_000.0.into(), sd: 8_400.0.into() },
        ),
    ];
    quantities.extend(environmental_quantities(load));
    UQProblem {
        quantities,
        response: ResponseSpec::named(
            "column_limit_state",
            &["P_p", "P_e", "delta_0", "y_0", "E"],
        ),
        event: EventSpec::Failure,
    }
}

/// Full design problem: minimize the cross-section area over the flange
/// width subject to the worst-case failure probability staying admissible.
pub fn column_design_problem(load: EnvironmentalLoad) -> DesignProblem {
    DesignProblem {
        variables: vec![DesignVariable::continuous(
            "b",
            WIDTH_DOMAIN_MM.0,
            WIDTH_DOMAIN_MM.1,
        )],
        cost: CostSpec::Deterministic { function: "column_area".into() },
        reliability: ReliabilitySpec {
            problem: column_uq_problem(load),
            p_adm: ADMISSIBLE_POF,
        },
        direction: Direction::Minimize,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // frozen against an independent arbitrary-precision transcription of the
    // section and limit-state formulas
    const W_AT_324_6: f64 = 526992.4666666667;
    const I_AT_324_6: f64 = 85530877.34;
    const G_REFERENCE: f64 = 0.7345737182196693;

    #[test]
    fn area_matches_reference_designs() {
        let a = |b: f64| section_properties(&SectionGeometry::new(b).unwrap()).area;
        assert_eq!(a(324.6), 12984.0);
        assert_eq!(a(329.6), 13184.0);
        assert_eq!(a(100.0), 4000.0);
    }

    #[test]
    fn section_formulas_match_independent_transcription() {
        let props = section_properties(&SectionGeometry::new(324.6).unwrap());
        assert!((props.section_modulus - W_AT_324_6).abs() / W_AT_324_6 < 1e-13);
        assert!((props.second_moment - I_AT_324_6).abs() / I_AT_324_6 < 1e-13);
    }

    #[test]
    fn limit_state_matches_reference_point() {
        let geom = SectionGeometry::new(324.6).unwrap();
        let state = ColumnState {
            p_p: 200.0e3,
            p_e: 300.0e3,
            delta_0: 60.0,
            y_0: 400.0,
            e_modulus: 210000.0,
        };
        let g = limit_state(&geom, &state);
        assert!((g - G_REFERENCE).abs() < 1e-12, "g = {g}");
    }

    #[test]
    fn zero_imperfection_reduces_to_pure_stress() {
        let geom = SectionGeometry::new(300.0).unwrap();
        let props = section_properties(&geom);
        let state = ColumnState {
            p_p: 150.0e3,
            p_e: 100.0e3,
            delta_0: 0.0,
            y_0: 400.0,
            e_modulus: 210000.0,
        };
        let expected = 1.0 - 250.0e3 / (400.0 * props.area);
        assert!((limit_state(&geom, &state) - expected).abs() < 1e-15);
    }

    #[test]
    fn buckling_pole_returns_certain_failure() {
        let geom = SectionGeometry::new(300.0).unwrap();
        let props = section_properties(&geom);
        let p_b = BUCKLING_COEFFICIENT * 210000.0 * props.second_moment
            / (COLUMN_LENGTH_MM * COLUMN_LENGTH_MM);
        let state = ColumnState {
            p_p: p_b / 2.0,
            p_e: p_b / 2.0,
            delta_0: 10.0,
            y_0: 400.0,
            e_modulus: 210000.0,
        };
        assert_eq!(limit_state(&geom, &state), CERTAIN_FAILURE);
    }

    #[test]
    fn approaching_the_pole_drives_g_to_minus_infinity() {
        let geom = SectionGeometry::new(300.0).unwrap();
        let props = section_properties(&geom);
        let p_b = BUCKLING_COEFFICIENT * 210000.0 * props.second_moment
            / (COLUMN_LENGTH_MM * COLUMN_LENGTH_MM);
        let g_at = |frac: f64| {
            limit_state(
                &geom,
                &ColumnState {
                    p_p: 0.0,
                    p_e: frac * p_b,
                    delta_0: 10.0,
                    y_0: 400.0,
                    e_modulus: 210000.0,
                },
            )
        };
        assert!(g_at(0.999) < g_at(0.99));
        assert!(g_at(0.9999) < -100.0);
    }

    #[test]
    fn monotonicity_at_reference_point() {
        let geom = SectionGeometry::new(324.6).unwrap();
        let base = ColumnState {
            p_p: 150.0e3,
            p_e: 250.0e3,
            delta_0: 30.0,
            y_0: 400.0,
            e_modulus: 210000.0,
        };
        let g0 = limit_state(&geom, &base);
        assert!(limit_state(&geom, &ColumnState { p_p: base.p_p + 1e3, ..base }) < g0);
        assert!(limit_state(&geom, &ColumnState { p_e: base.p_e + 1e3, ..base }) < g0);
        assert!(limit_state(&geom, &ColumnState { delta_0: base.delta_0 + 1.0, ..base }) < g0);
        assert!(limit_state(&geom, &ColumnState { y_0: base.y_0 + 5.0, ..base }) > g0);
    }

    #[test]
    fn adapters_signal_bad_arity_with_nan() {
        assert!(column_limit_state(&[], &[1.0; 5]).is_nan());
        assert!(column_limit_state(&[300.0], &[1.0; 3]).is_nan());
        assert!(column_area(&[], &[]).is_nan());
        assert!(column_area(&[-5.0], &[]).is_nan());
    }

    #[test]
    fn all_scenario_variants_validate_cleanly() {
        for load in [
            EnvironmentalLoad::GumbelFamily,
            EnvironmentalLoad::MomentBox100To500,
            EnvironmentalLoad::MomentBox0To1000,
        ] {
            let design = column_design_problem(load);
            let diags = crate::rbdo::validate_design(&design);
            assert!(diags.is_empty(), "{load:?}: {diags:?}");
        }
    }

    #[test]
    fn scenario_units_are_newtons_and_millimetres() {
        let gumbel = column_uq_problem(EnvironmentalLoad::GumbelFamily);
        let pp = gumbel.quantity("P_p").unwrap();
        assert_eq!((pp.range.lower, pp.range.upper), (1.0e5, 2.0e5));
        let d0 = gumbel.quantity("delta_0").unwrap();
        assert_eq!((d0.range.lower, d0.range.upper), (0.0, 60.0));
        let ae = gumbel.quantity("a_e").unwrap();
        assert_eq!((ae.range.lower, ae.range.upper), (1.88e5, 2.36e5));
        let mean_ae = &ae.moment_constraints[0];
        assert_eq!((mean_ae.lower, mean_ae.upper), (2.014e5, 2.226e5));
        let be = gumbel.quantity("b_e").unwrap();
        assert_eq!((be.moment_constraints[0].lower, be.moment_constraints[0].upper), (49_685.0, 54_915.0));

        let wide = column_uq_problem(EnvironmentalLoad::MomentBox0To1000);
        let pe = wide.quantity("P_e").unwrap();
        assert_eq!((pe.range.lower, pe.range.upper), (0.0, 1.0e6));
        let [mean, central2, central3] = pe.moment_constraints.as_slice() else {
            panic!("expected three moment constraints");
        };
        assert_eq!((mean.order, central2.order, central3.order), (1, 2, 3));
        let rel = |x: f64, y: f64| (x / y - 1.0).abs();
        assert!(rel(mean.lower, 2.094e5) < 1e-12 && rel(mean.upper, 2.79e5) < 1e-12);
        assert!(rel(central2.lower, 2.25191e9) < 1e-12 && rel(central2.upper, 9.00766e9) < 1e-12);
        assert!(rel(central3.lower, 1.21775e14) < 1e-12 && rel(central3.upper, 9.74204e14) < 1e-12);

        let narrow = column_uq_problem(EnvironmentalLoad::MomentBox100To500);
        let pe = narrow.quantity("P_e").unwrap();
        assert_eq!((pe.range.lower, pe.range.upper), (1.0e5, 5.0e5));
    }

    #[test]
    fn gumbel_parameters_are_wired_to_the_epistemic_handles() {
        let problem = column_uq_problem(EnvironmentalLoad::GumbelFamily);
        let pe = problem.quantity("P_e").unwrap();
        let dist = pe.distribution.as_ref().unwrap();
        let params = dist.params();
        assert_eq!(params[0].1.as_ref_name(), Some("a_e"));
        assert_eq!(params[1].1.as_ref_name(), Some("b_e"));
        assert_eq!(problem.epistemic_indices().len(), 4);
        assert_eq!(
            column_uq_problem(EnvironmentalLoad::MomentBox0To1000).epistemic_indices().len(),
            3
        );
    }

    #[test]
    fn design_layer_minimizes_area_over_the_width_domain() {
        let design = column_design_problem(EnvironmentalLoad::GumbelFamily);
        assert_eq!(design.reliability.p_adm, 1.3e-6);
        assert_eq!(design.direction, Direction::Minimize);
        let [b] = design.variables.as_slice() else { panic!("one variable") };
        assert_eq!(b.name, "b");
        assert_eq!(b.kind, crate::rbdo::VariableKind::Continuous { lower: 250.0, upper: 400.0 });
        let CostSpec::Deterministic { function } = &design.cost else {
            panic!("deterministic cost")
        };
        assert_eq!(function, "column_area");
    }
}
