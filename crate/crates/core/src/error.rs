use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{what} exceeds cap {cap}")]
    CapExceeded { what: &'static str, cap: usize },
    #[error("root solver did not converge after {iterations} iterations (residual {residual:e})")]
    RootsNoConvergence { iterations: usize, residual: f64 },
    #[error("fiber over {base:?} is not simple (separation {separation:e})")]
    NonSimpleFiber { base: [f64; 2], separation: f64 },
    #[error("cannot route loop: {0}")]
    Routing(String),
    #[error("path tracking lost track at t = {t:.6} (step {step:e})")]
    LostTrack { t: f64, step: f64 },
    #[error("ambiguous endpoint match for fiber point {index}")]
    AmbiguousMatch { index: usize },
    #[error("internal consistency failure: {0}")]
    Consistency(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("budget exhausted: {0}")]
    Budget(String),
    #[error("no near-return for group {group} within {horizon} iterates (best norm {best:e}, target {target:e})")]
    NoNearReturn {
        group: usize,
        horizon: usize,
        best: f64,
        target: f64,
    },
    #[error("iterates escaped the sample region at index {index}")]
    Overflow { index: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
