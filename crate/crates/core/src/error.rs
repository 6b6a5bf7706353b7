use alloc::string::String;

/// Failure modes shared by every module of the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("unsupported tape operation `{0}`")]
    UnsupportedOp(String),
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("target {target} infeasible; achievable range is [{min}, {max}]")]
    Infeasible { target: f64, min: f64, max: f64 },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
