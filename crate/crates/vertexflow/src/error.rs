use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("path mismatch: {0}")]
    PathMismatch(String),
    #[error("coloring is not monotone: color {prev} at step {index} is followed by {next}")]
    NonMonotoneColoring { index: usize, prev: u32, next: u32 },
    #[error("lower path is not below upper path at index {index}")]
    NotBelow { index: usize },
    #[error("point ({alpha}, {beta}) lies outside the domain")]
    PointOutsideDomain { alpha: f64, beta: f64 },
    #[error("color map is not monotone at color {0}")]
    NonMonotoneMap(u32),
    #[error("parameter singularity: {0}")]
    ParameterSingularity(String),
    #[error("weight outside [0,1] at vertex (col {col}, row {row}): {value}")]
    ParameterRange { col: usize, row: usize, value: String },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("enumeration cap exceeded: {found} vertices, cap {cap}")]
    CapExceeded { found: usize, cap: usize },
    #[error("singular evaluation: variables {0} and {1} coincide")]
    SingularEvaluation(usize, usize),
    #[error("infeasible contour geometry: {0}")]
    InfeasibleContour(String),
    #[error("contour resolution: non-finite integrand at a node; increase the node count")]
    ContourResolution,
    #[error("query constraint violated: {0}")]
    Constraint(String),
    #[error("unsupported regime: {0}")]
    Unsupported(String),
    #[error("invalid shift-isomorphism: {0}")]
    InvalidShiftIsomorphism(String),
    #[error("configuration error at {pointer}: {message}")]
    Config { pointer: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
