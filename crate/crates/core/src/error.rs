use thiserror::Error;

/// Errors produced by spline construction, solvers, estimation and
/// identification routines.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid domain: lower bound {0} must be strictly less than upper bound {1}")]
    InvalidDomain(f64, f64),

    #[error("spline order must be at least 1, got {0}")]
    InvalidOrder(usize),

    #[error("evaluation point {x} lies outside the basis domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("coefficient vector has length {got}, basis dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("quantile knot placement needs at least {needed} distinct sample values, got {got}")]
    InsufficientSample { needed: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("ridge system is singular even after diagonal jitter")]
    SingularSystem,

    #[error("quadrature node count {0} is outside the supported range 1..=64")]
    InvalidNodeCount(usize),

    #[error("component {0} is degenerate: L2 norm of the unnormalized estimate is below 1e-10")]
    DegenerateComponent(usize),

    #[error("segment length {i_t} does not divide the sample length {t}")]
    Indivisible { i_t: usize, t: usize },

    #[error("segment length {i_t} must exceed the per-group column count {cols}")]
    GroupTooSmall { i_t: usize, cols: usize },

    #[error("no admissible (I, K) pair in the configured grids")]
    EmptyGrid,

    #[error("stage-2 identification requires additive spline order >= 3, got {0}")]
    OrderTooLowForCurvature(usize),

    #[error("penalty grid must be nonempty and sorted ascending with positive entries")]
    InvalidPenaltyGrid,

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("negative argument {0} passed to the SCAD derivative")]
    NegativeScadArgument(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
