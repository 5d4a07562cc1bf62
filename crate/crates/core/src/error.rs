use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("graph is not strongly connected: vertex {to} is unreachable from vertex {from}")]
    NotStronglyConnected { from: usize, to: usize },

    #[error("edge ({x}, {y}) has non-positive or non-finite rate {rate}")]
    NonPositiveRate { x: usize, y: usize, rate: f64 },

    #[error("edge ({x}, {y}) appears more than once")]
    DuplicateEdge { x: usize, y: usize },

    #[error("self-loop at vertex {0} is not allowed")]
    SelfLoop(usize),

    #[error("vertex {vertex} out of range for a graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },

    #[error("dimension {n} exceeds the cap of {cap}")]
    SizeCap { n: usize, cap: usize },

    #[error("matrix is singular (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("complementary block is singular")]
    SingularBlock,

    #[error("eigenvalue iteration did not converge (matrix hash {hash:016x})")]
    EigenNoConvergence { hash: u64 },

    #[error("spectrum has non-real eigenvalues")]
    ComplexSpectrum,

    #[error("target of {m} roots needs q = +infinity")]
    DivergesToInfinity { m: usize },

    #[error("target of {m} roots is only reached in the limit q -> 0")]
    ZeroBoundary { m: usize },

    #[error("fixed-point iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("no sample with {m} roots after {tries} tries")]
    Exhausted {
        m: usize,
        tries: usize,
        histogram: Vec<usize>,
    },

    #[error("targeting did not reach the window after {} iterations", trace.len())]
    IterationCap { trace: Vec<(f64, usize)> },

    #[error("forest has {forest} vertices but the render geometry has {geometry}")]
    GeometryMismatch { forest: usize, geometry: usize },

    #[error("graph is not reversible")]
    NotReversible,

    #[error("block {0:?} has no vertex reachable from all of its vertices")]
    ReducibleBlock(Vec<usize>),

    #[error("the dynamics killed on the absorbing set is not irreducible on its complement")]
    ReducibleAfterAbsorption,

    #[error("interpolation point {0} appears twice")]
    DuplicatePoint(f64),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("root count dropped from {from} to {to} in a single event")]
    DecrementViolation { from: usize, to: usize },

    #[error("invalid killing plan: {0}")]
    InvalidKillingPlan(String),

    #[error("invalid forest: {0}")]
    InvalidForest(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
