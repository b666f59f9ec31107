use thiserror::Error;

/// Failure modes of the analytics layer.
///
/// Most variants are degeneracies of the data rather than programming
/// errors; the pipeline turns them into missing values.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degree {degree} exceeds basis maximum {max}")]
    DegreeOutOfRange { degree: usize, max: usize },
    #[error("affine scale must be non-zero")]
    DegenerateScale,
    #[error("price-polynomial basis has no infinitesimal time-shift operator")]
    NoTimeShiftOperator,
    #[error("tick time {t} precedes accumulator time {now}")]
    TimeRegression { t: i64, now: i64 },
    #[error("invalid tick: {0}")]
    InvalidTick(&'static str),
    #[error("gram matrix is singular in every direction")]
    SingularGram,
    #[error("state has zero norm")]
    ZeroState,
    #[error("maximal execution flow is not positive")]
    ZeroFlow,
    #[error("future price is undefined: degeneracy product {0:e} below guard")]
    DegenerateFuture(f64),
    #[error("first-order perturbation vanishes: <phi|phi> = {0:e}")]
    EigenstateDegeneracy(f64),
    #[error("two-point quadrature does not exist")]
    NoQuadrature,
    #[error("measure is supported at a single point {node}")]
    DegenerateSupport { node: f64, mass: f64 },
    #[error("fourth price moment is required")]
    MissingMoment,
    #[error("spectrum is degenerate")]
    DegenerateSpectrum,
    #[error("no two-point quadrature at future price {0}")]
    NoQuadratureAt(f64),
    #[error("measures disagree on total mass: {0} vs {1}")]
    MassMismatch(f64, f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
