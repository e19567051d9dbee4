use alloc::string::String;

/// Errors raised by the core engine.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch")]
    DimensionMismatch,
    #[error("vector has components in frozen directions")]
    FrozenComponent,
    #[error("monoid generators are not linearly independent")]
    DependentGenerators,
    #[error("invalid fixed data: {0}")]
    InvalidFixedData(&'static str),
    #[error("wall functions have different directions")]
    DirectionMismatch,
    #[error("requested order exceeds the stored truncation of a wall function")]
    TruncationExceeded,
    #[error("operation requires rank 2")]
    NotRank2,
    #[error("path touches the singular locus or runs inside a wall")]
    BadPath,
    #[error("point lies on no wall")]
    PointOnNoWall,
    #[error("endpoint lies on the support of the diagram")]
    EndpointOnSupport,
    #[error("trajectory passes through the origin")]
    ThroughOrigin,
    #[error("perturbation direction is not generic for this trajectory")]
    NonGenericPerturbation,
    #[error("degenerate configuration: {0}")]
    Degenerate(&'static str),
    #[error("pair is not balanced")]
    NotBalanced,
    #[error("time is not in the open interval (0, T)")]
    TauOutOfRange,
    #[error("no valid scaling (a, b) exists")]
    NoValidScaling,
    #[error("point set is unbounded or empty")]
    Unbounded,
    #[error("invalid segment: {0}")]
    InvalidSegment(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = core::result::Result<T, Error>;
