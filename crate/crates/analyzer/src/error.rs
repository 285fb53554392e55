use thiserror::Error;

/// Errors raised by the analyzer.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyzerError {
    #[error("invalid mdp: {0}")]
    InvalidMdp(String),

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("unknown action `{0}`")]
    UnknownAction(String),

    #[error("action subset must not be empty")]
    EmptyActionSubset,

    #[error("projection must retain at least one attribute")]
    EmptyProjection,

    #[error("policy enumeration needs {policies} evaluations, budget is {budget}")]
    BudgetExceeded { policies: u128, budget: u128 },

    #[error("mdp document: {0}")]
    Document(String),
}

pub type Result<T, E = AnalyzerError> = std::result::Result<T, E>;
