//! Named scalar functions that scenario files can reference. Responses are
//! called as `f(theta, inputs)` where `theta` holds design parameters and
//! `inputs` the projected uncertain-quantity values; deterministic cost
//! functions use the same shape with empty inputs. Arity problems surface as
//! NaN, which downstream estimators and optimizers treat as invalid rather
//! than crashing.

use crate::benchmark;
use crate::error::{Error, Result};

pub type NamedFn = fn(&[f64], &[f64]) -> f64;

/// Name → function → one-line summary, sorted by name.
const TABLE: &[(&str, NamedFn, &str)] = &[
    ("column_area", benchmark::column_area, "cross-section area A(b) in mm², theta = [b]"),
    (
        "column_limit_state",
        benchmark::column_limit_state,
        "buckling-column limit state, theta = [b], inputs = [P_p, P_e, delta_0, y_0, E]",
    ),
    ("coupled_margin", coupled_margin, "theta[0] + inputs[0] - inputs[1]"),
    ("first_theta", first_theta, "theta[0]"),
    (
        "proximity_margin",
        proximity_margin,
        "(inputs[0] - inputs[1])^2 - 1/4; fails when the inputs are within 1/2",
    ),
    ("theta_minus_input", theta_minus_input, "theta[0] - inputs[0]"),
    ("theta_squared", theta_squared, "theta[0]^2"),
];

pub fn lookup(name: &str) -> Result<NamedFn> {
    TABLE
        .binary_search_by(|entry| entry.0.cmp(name))
        .map(|i| TABLE[i].1)
        .map_err(|_| Error::UnknownFunction { name: name.to_string() })
}

/// All registered names with their summaries, in sorted order.
pub fn catalog() -> impl Iterator<Item = (&'static str, &'static str)> {
    TABLE.iter().map(|(name, _, summary)| (*name, *summary))
}

fn arg(values: &[f64], i: usize) -> f64 {
    values.get(i).copied().unwrap_or(f64::NAN)
}

fn coupled_margin(theta: &[f64], inputs: &[f64]) -> f64 {
    arg(theta, 0) + arg(inputs, 0) - arg(inputs, 1)
}

fn first_theta(theta: &[f64], _inputs: &[f64]) -> f64 {
    arg(theta, 0)
}

fn proximity_margin(_theta: &[f64], inputs: &[f64]) -> f64 {
    let d = arg(inputs, 0) - arg(inputs, 1);
    d * d - 0.25
}

fn theta_minus_input(theta: &[f64], inputs: &[f64]) -> f64 {
    arg(theta, 0) - arg(inputs, 0)
}

fn theta_squared(theta: &[f64], _inputs: &[f64]) -> f64 {
    let t = arg(theta, 0);
    t * t
}
