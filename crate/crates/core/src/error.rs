use crate::model::Diagnostic;

pub type Result<T> = std::result::Result<T, Error>;

/// Library-wide error type. Validation produces `Diagnostic` lists instead;
/// `Error` is for contract violations and numerical dead ends.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    /// The moment sequence touches or leaves the moment space. `order` is the
    /// first order at which the Hankel-type positivity fails.
    #[error("degenerate moment sequence at order {order}")]
    DegenerateMoments { order: u32 },

    #[error("enumeration of {combinations} support-point combinations exceeds cap {cap}")]
    EnumerationTooLarge { combinations: u128, cap: u64 },

    #[error("bracket does not straddle target: f({lo}) = {f_lo}, f({hi}) = {f_hi}, target = {target}")]
    BracketDoesNotStraddle {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
        target: f64,
    },

    #[error("model output is not finite at sample {sample:?}")]
    NonFiniteModel { sample: Vec<f64> },

    #[error("value {value} outside support of {family} distribution")]
    OutsideSupport { family: &'static str, value: f64 },

    #[error("unknown registered function `{name}`")]
    UnknownFunction { name: String },

    #[error("quantity `{name}` not found")]
    UnknownQuantity { name: String },

    #[error("coupling of design variable `{variable}` drives quantity `{quantity}` outside its physical bounds: {detail}")]
    CouplingOutOfRange {
        variable: String,
        quantity: String,
        detail: String,
    },

    #[error("problem fails validation: {}", format_diagnostics(.0))]
    InvalidProblem(Vec<Diagnostic>),

    #[error("optimizer finished without any candidate satisfying the moment constraints")]
    NoFeasibleCandidate,

    #[error("scenario parse error: {0}")]
    ScenarioParse(String),

    #[error("scenario render error: {0}")]
    ScenarioRender(String),
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
