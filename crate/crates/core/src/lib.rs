//! Bounds on failure probabilities when some inputs have known
//! distributions and others are known only through interval ranges and
//! partial moment information, plus a design loop that pushes the
//! worst-case bound under a target.
//!
//! The pieces, bottom up:
//!
//! - [`model`]: problem description (uncertain quantities, constraints,
//!   response, event) and its validation.
//! - [`dirac`]: weighted point masses, the extremal form every
//!   moment-constrained measure can be reduced to.
//! - [`canonical`]: coordinates that turn the curved moment body into a
//!   unit cube, and back.
//! - [`dist`]: the fixed-distribution families and their transforms to
//!   standard normal space.
//! - [`sampling`]: directional line sampling for small failure
//!   probabilities.
//! - [`optimizer`]: bound-constrained global search (self-adaptive
//!   differential evolution with strategy competition).
//! - [`bounds`]: the outer problem; decodes an optimizer vector into
//!   discrete measures, enumerates their product, and aggregates the inner
//!   estimates into the bound.
//! - [`rbdo`]: design iteration driving the worst-case bound to an
//!   admissible level.
//! - [`benchmark`]: the built-in column buckling study.
//! - [`scenario`]: declarative scenario files tying all of it together.

pub mod benchmark;
pub mod bounds;
pub mod canonical;
pub mod dirac;
pub mod dist;
pub mod error;
pub mod model;
pub mod optimizer;
pub mod rbdo;
pub mod registry;
pub mod sampling;
pub mod scenario;

pub use dirac::DiracMeasure;
pub use error::{Error, Result};
pub use model::{
    Classification, DistributionSpec, EventSpec, Interval, MomentConstraint, MomentKind, Param,
    ResponseForm, ResponseSpec, UncertainQuantity, UQProblem,
};
