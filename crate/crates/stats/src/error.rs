use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("input is empty")]
    EmptyInput,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("p-value {0} is outside [0, 1]")]
    InvalidPValue(f64),
    #[error("election has no ballots")]
    EmptyElection,
    #[error("invalid ballot from `{voter}`: {reason}")]
    InvalidBallot { voter: String, reason: String },
}
