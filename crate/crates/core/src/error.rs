use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("metric is not positive definite at node {node}")]
    NonSpdMetric { node: usize },

    #[error("metric inverse check failed at node {node} (defect {defect:e})")]
    MetricInverse { node: usize, defect: f64 },

    #[error("field dimensions {found:?} do not match domain {expected:?}")]
    DomainMismatch {
        expected: [usize; 3],
        found: [usize; 3],
    },

    #[error("node {node} is not admissible: {reason}")]
    BadNode { node: usize, reason: String },

    #[error("quaternions live at different nodes ({0} vs {1})")]
    NodeMismatch(usize, usize),

    #[error("frame is not g-orthonormal (defect {0:e})")]
    NonOrthonormalFrame(f64),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("nontrivial topology is not supported here: {0}")]
    NontrivialTopology(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("target jet is not orthogonal to the Laplace jet (|<s, λ>| = {0:e})")]
    NotOrthogonal(f64),

    #[error("ill-conditioned sample set: {0}")]
    IllConditioned(String),

    #[error("readout is not positive definite")]
    NonSpdReadout,

    #[error("no admissible radius at center node {0}")]
    NoAdmissibleRadius(usize),

    #[error("control synthesis failed: {0}")]
    ControlFailed(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
