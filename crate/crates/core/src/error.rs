use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("health-state label must be non-empty")]
    EmptyLabel,
    #[error("unknown health state `{0}`")]
    UnknownState(String),
    #[error("productivity of individual {0} is outside [0, 1]")]
    OutOfRangeProductivity(usize),
    #[error("lifetime of individual {0} is negative")]
    NegativeLifetime(usize),
    #[error("lifetime of individual {0} is not finite")]
    NonFiniteLifetime(usize),
    #[error("permutation is not a bijection on the individuals")]
    InvalidPermutation,
    #[error("index {index} out of range for {len} individuals")]
    IndexOutOfRange { index: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("weight table has no entry for health state `{0}`")]
    MissingWeight(String),
    #[error("{0} is not supported for this evaluator family")]
    UnsupportedFamily(&'static str),
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error("parameter {name} = {value} is outside its legal range")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AxiomError {
    #[error("check configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensitivityError {
    #[error("parameter value {value} outside range [{lo}, {hi}]")]
    ParameterOutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("invalid parametric family: {0}")]
    InvalidFamily(String),
    #[error("grid_n must be at least 2 and tol positive")]
    InvalidGrid,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ElicitationError {
    #[error("bad bracket [{lo}, {hi}]: {reason}")]
    BadBracket { lo: f64, hi: f64, reason: String },
    #[error("quality weight q_a = {0} must lie in (0, 1]")]
    InvalidQ(f64),
    #[error("tolerance must be positive and finite")]
    InvalidTolerance,
    #[error("session is no longer active")]
    SessionFinished,
    #[error("session has not converged")]
    NotConverged,
    #[error("simulated respondents need a qaly_paly truth specification")]
    UnsupportedTruthFamily,
    #[error("no estimates to aggregate")]
    EmptyInput,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IoError {
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error("line {line}: {message}")]
    Line { line: u64, message: String },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
