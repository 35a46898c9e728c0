use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("state {state} action {action}: probabilities sum to {sum}, expected 1")]
    RowSumError { state: usize, action: usize, sum: f64 },
    #[error("state {state} action {action}: reward {reward} outside [0, 1]")]
    RewardRangeError { state: usize, action: usize, reward: f64 },
    #[error("state {0} has no actions")]
    EmptyActionSet(usize),
    #[error("state {state} action {action}: probability vector has length {got}, expected {expected}")]
    ProbLength { state: usize, action: usize, expected: usize, got: usize },
    #[error("state {state} action {action}: invalid transition probability {value}")]
    InvalidProbability { state: usize, action: usize, value: f64 },
    #[error("MDP must have at least one state")]
    NoStates,
    #[error("parse error at `{path}`: {message}")]
    ParseError { path: String, message: String },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("span of an empty vector is undefined")]
    EmptyVector,
    #[error("policy does not match MDP: {0}")]
    PolicyMismatch(String),
    #[error("discount factor {0} outside the admitted range")]
    GammaOutOfRange(f64),
    #[error("linear system numerically singular (condition estimate {condition_estimate:e})")]
    SingularSystem { condition_estimate: f64 },
    #[error("state {0} is not transient under this policy")]
    NotTransient(usize),
    #[error("{size} deterministic policies exceed the enumeration cap {cap}")]
    EnumerationTooLarge { size: u128, cap: u128 },
    #[error("no reference policy passes the unmodified optimality check: {0}")]
    NoReferenceFound(String),
    #[error("minimum gain gap {0} is not positive")]
    DegenerateDelta(f64),
    #[error("gain-dropping reward is supported on recurrent state {0}; gap tolerance misclassified a pair")]
    GainDropOnRecurrentState(usize),
    #[error("value iteration hit {sweeps} sweeps with change {change:e}; suspected misclassified gain-dropping pair")]
    NonconvergenceSuspected { sweeps: usize, change: f64 },
    #[error("operator `{0}` declares no contraction factor below 1")]
    MissingContraction(String),
    #[error("iteration budget {n} is smaller than the initialization length {required}")]
    IterationBudgetTooSmall { n: usize, required: usize },
    #[error("invalid iteration parameter: {0}")]
    InvalidIterationCount(String),
    #[error("policy is not {eps}-greedy: shortfall {shortfall:e} at state {state}")]
    NotEpsGreedy { eps: f64, shortfall: f64, state: usize },
    #[error("epsilon {0} out of range")]
    EpsOutOfRange(f64),
    #[error("invalid generator parameter: {0}")]
    InvalidGenerator(String),
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// True for failures of the numerical machinery rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularSystem { .. }
                | Error::NonconvergenceSuspected { .. }
                | Error::NoReferenceFound(_)
                | Error::DegenerateDelta(_)
                | Error::GainDropOnRecurrentState(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
