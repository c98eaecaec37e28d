//! Finitely supported probability measures.
//!
//! The reduction behind the bound solver replaces every epistemic measure by
//! a convex combination of point masses, so everything downstream only ever
//! touches this type. Weights must sum to one; a drift of at most 1e-9 is
//! repaired by renormalization, anything larger is rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MomentKind, UncertainQuantity};

/// Weights must sum to 1 within this tolerance after construction.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Largest weight-sum drift that construction silently renormalizes.
pub const WEIGHT_RENORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DiracMeasureRaw", into = "DiracMeasureRaw")]
pub struct DiracMeasure {
    points: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DiracMeasureRaw {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl From<DiracMeasure> for DiracMeasureRaw {
    fn from(m: DiracMeasure) -> Self {
        Self { points: m.points, weights: m.weights }
    }
}

impl TryFrom<DiracMeasureRaw> for DiracMeasure {
    type Error = String;
    fn try_from(raw: DiracMeasureRaw) -> std::result::Result<Self, String> {
        DiracMeasure::new(raw.points, raw.weights).map_err(|e| e.to_string())
    }
}

impl DiracMeasure {
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "need matching non-empty points/weights, got {}/{}",
                points.len(),
                weights.len()
            )));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite support point".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidMeasure("weights must be finite and non-negative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_RENORM_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {sum}, not 1")));
        }
        let weights = if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            weights.iter().map(|w| w / sum).collect()
        } else {
            weights
        };
        Ok(Self { points, weights })
    }

    pub fn point_mass(x: f64) -> Self {
        Self { points: vec![x], weights: vec![1.0] }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// E[y^order]; order zero is rejected rather than returning the trivial 1.
    pub fn classical_moment(&self, order: u32) -> Result<f64> {
        if order == 0 {
            return Err(Error::InvalidArgument("moment order must be >= 1".into()));
        }
        Ok(self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(y, w)| w * y.powi(order as i32))
            .sum())
    }

    /// E[(y - E[y])^order]. Order 1 is 0 by construction and allowed.
    pub fn central_moment(&self, order: u32) -> Result<f64> {
        if order == 0 {
            return Err(Error::InvalidArgument("moment order must be >= 1".into()));
        }
        let mean = self.classical_moment(1)?;
        Ok(self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(y, w)| w * (y - mean).powi(order as i32))
            .sum())
    }

    fn moment_of_kind(&self, kind: MomentKind, order: u32) -> Result<f64> {
        match kind {
            MomentKind::Classical => self.classical_moment(order),
            MomentKind::Central => self.central_moment(order),
        }
    }

    /// True when all support points lie in the quantity's range and every
    /// moment constraint holds, with each interval inflated on both sides by
    /// `tol` relative to its magnitude (floor 1).
    pub fn satisfies(&self, q: &UncertainQuantity, tol: f64) -> bool {
        self.constraint_violation(q) <= tol
    }

    /// Largest relative violation over the range and all moment constraints;
    /// zero when everything holds exactly. Used both for the `satisfies`
    /// check and as a penalty term by the bound solver.
    pub fn constraint_violation(&self, q: &UncertainQuantity) -> f64 {
        let mut worst: f64 = 0.0;
        let rscale = scale(q.range.lower, q.range.upper);
        for y in &self.points {
            worst = worst.max((q.range.lower - y).max(y - q.range.upper) / rscale);
        }
        for c in &q.moment_constraints {
            let m = match self.moment_of_kind(c.kind, c.order) {
                Ok(m) => m,
                Err(_) => return f64::INFINITY,
            };
            let s = scale(c.lower, c.upper);
            worst = worst.max((c.lower - m).max(m - c.upper) / s);
        }
        worst.max(0.0)
    }
}

fn scale(lo: f64, hi: f64) -> f64 {
    lo.abs().max(hi.abs()).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MomentConstraint;

    #[test]
    fn classical_moment_of_three_points() {
        let m = DiracMeasure::new(vec![0.2, 0.5, 0.9], vec![0.3, 0.4, 0.3]).unwrap();
        // independent rational arithmetic: 3/10*(1/125) + 2/5*(1/8) + 3/10*(729/1000)
        // = 24/10000 + 500/10000 + 2187/10000 = 2711/10000
        assert!((m.classical_moment(3).unwrap() - 0.2711).abs() < 1e-15);
    }

    #[test]
    fn central_third_moment_matches_closed_form() {
        // two-point measure at {0, 1} with P(1) = w has
        // central third moment w(1-w)(1-2w)
        let m = DiracMeasure::new(vec![0.0, 1.0], vec![0.6, 0.4]).unwrap();
        let w: f64 = 0.4;
        assert!((m.central_moment(3).unwrap() - w * (1.0 - w) * (1.0 - 2.0 * w)).abs() < 1e-15);
        assert!((m.central_moment(3).unwrap() - 0.048).abs() < 1e-15);
    }

    #[test]
    fn central_first_moment_is_zero() {
        let m = DiracMeasure::new(vec![1.0, 4.0, 9.0], vec![0.2, 0.5, 0.3]).unwrap();
        assert!(m.central_moment(1).unwrap().abs() < 1e-15);
    }

    #[test]
    fn order_zero_is_rejected() {
        let m = DiracMeasure::point_mass(2.0);
        assert!(m.classical_moment(0).is_err());
        assert!(m.central_moment(0).is_err());
    }

    #[test]
    fn small_weight_drift_is_renormalized() {
        let m = DiracMeasure::new(vec![0.0, 1.0], vec![0.5, 0.5 + 1e-10]).unwrap();
        let sum: f64 = m.weights().iter().sum();
        assert!((sum - 1.0).abs() <= WEIGHT_SUM_TOL);
    }

    #[test]
    fn large_weight_drift_is_rejected() {
        assert!(DiracMeasure::new(vec![0.0, 1.0], vec![0.6, 0.6]).is_err());
    }

    #[test]
    fn negative_weight_is_rejected() {
        assert!(DiracMeasure::new(vec![0.0, 1.0], vec![1.2, -0.2]).is_err());
    }

    #[test]
    fn point_mass_degeneracy() {
        let m = DiracMeasure::point_mass(3.0);
        assert_eq!(m.classical_moment(1).unwrap(), 3.0);
        assert_eq!(m.central_moment(2).unwrap(), 0.0);
        assert_eq!(m.central_moment(5).unwrap(), 0.0);
    }

    #[test]
    fn satisfies_checks_mean_interval() {
        let q = UncertainQuantity::epistemic("y", 0.0, 1.0)
            .with_constraint(MomentConstraint::classical(1, 0.105, 0.115));
        let m = DiracMeasure::new(vec![0.1, 0.15], vec![0.5, 0.5]).unwrap();
        // mean is 0.125, outside [0.105, 0.115]
        assert!(!m.satisfies(&q, 1e-9));
        let m2 = DiracMeasure::new(vec![0.1, 0.12], vec![0.5, 0.5]).unwrap();
        assert!(m2.satisfies(&q, 1e-9));
    }

    #[test]
    fn satisfies_checks_range() {
        let q = UncertainQuantity::epistemic("y", 0.0, 1.0);
        let m = DiracMeasure::new(vec![0.5, 1.2], vec![0.5, 0.5]).unwrap();
        assert!(!m.satisfies(&q, 1e-9));
    }

    #[test]
    fn violation_uses_relative_scale() {
        // interval magnitudes around 2e5: absolute slack of 1e-3 is far below
        // tol * scale = 1e-6 * 2.226e5
        let q = UncertainQuantity::epistemic("a_e", 188e3, 236e3)
            .with_constraint(MomentConstraint::classical(1, 201.4e3, 222.6e3));
        let m = DiracMeasure::new(vec![188e3, 236e3], vec![0.279166666, 0.720833334]).unwrap();
        let mean = m.classical_moment(1).unwrap();
        assert!(mean <= 222.6e3 + 1e-3 && mean >= 222.6e3 - 1.0);
        assert!(m.satisfies(&q, 1e-6));
    }
}
