use thiserror::Error;

use crate::potential::VarId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong while building, parsing or solving a diagram.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),

    #[error("variable `{var}` has duplicate state label `{state}`")]
    DuplicateState { var: String, state: String },

    #[error("variable `{0}` has no states")]
    NoStates(String),

    #[error("the diagram contains a directed cycle through `{0}`")]
    Cycle(String),

    #[error("table for `{owner}` has {got} entries, expected {expected}")]
    TableSize { owner: String, expected: usize, got: usize },

    #[error("CPT for `{owner}` row {row} sums to {sum} (expected 1)")]
    RowNotNormalized { owner: String, row: usize, sum: f64 },

    #[error("CPT for `{owner}` contains a negative entry in row {row}")]
    NegativeProbability { owner: String, row: usize },

    #[error("chance variable `{0}` has no conditional probability table")]
    MissingCpt(String),

    #[error("chance variable `{0}` appears in the head of more than one table")]
    DuplicateCpt(String),

    #[error("`{0}` is not a chance variable")]
    NotChance(String),

    #[error("`{0}` is not a decision variable")]
    NotDecision(String),

    #[error("decision order inconsistent: {0}")]
    OrderInconsistent(String),

    #[error("arcs into `{var}` do not match its table: {detail}")]
    ArcMismatch { var: String, detail: String },

    #[error("utility product is undefined; utilities combine by addition")]
    UtilityProduct,

    #[error("operation expects a {expected} potential")]
    KindMismatch { expected: &'static str },

    #[error("variable {0} is not in the potential's domain")]
    NotInDomain(VarId),

    #[error("division of a nonzero value by zero (inconsistent model or evidence)")]
    DivisionByZero,

    #[error("invalid evidence: {0}")]
    Evidence(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("state space of {size} exceeds the oracle cap of {cap}")]
    CapExceeded { size: u128, cap: u128 },

    #[error("optimal full-past rule for `{0}` is not a function of its relevant past")]
    ProjectionUndefined(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// True for errors caused by the model text or the query rather than by a solver.
    pub fn is_model_error(&self) -> bool {
        !matches!(
            self,
            Error::UtilityProduct
                | Error::KindMismatch { .. }
                | Error::NotInDomain(_)
                | Error::DivisionByZero
                | Error::CapExceeded { .. }
                | Error::ProjectionUndefined(_)
                | Error::Internal(_)
        )
    }
}
