use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown built-in model `{0}`")]
    UnknownModel(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("row {state}: transition probabilities sum to {sum} (tolerance {tol})")]
    RowSumViolation { state: usize, sum: f64, tol: f64 },

    #[error("sojourn distribution {state} -> {target} is undefined: transition probability is zero")]
    UndefinedCdf { state: usize, target: usize },

    #[error("age sweep for state {state} diverged (|q| = {value}, bound {bound})")]
    DivergentSweep { state: usize, value: f64, bound: f64 },

    #[error("no convergence after {iterations} iterations (last residual {residual})")]
    MaxIterExceeded { iterations: usize, residual: f64 },

    #[error("brute-force enumeration would visit {count} policies (limit {limit})")]
    TooLarge { count: u128, limit: u128 },

    #[error("vanishing-discount gains are not Cauchy: last gap {gap} exceeds {tol}")]
    NotConverging { gap: f64, tol: f64 },

    #[error("reachability of state {reference} fails: {reason}")]
    A6Missing { reference: usize, reason: String },

    #[error("bisection bracket is invalid: Phi({g}) = {phi}")]
    BisectionBracketFailure { g: f64, phi: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
