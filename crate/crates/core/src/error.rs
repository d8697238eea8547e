use thiserror::Error;

/// Errors raised by model construction, queries and certificate checks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("index {index} is outside the weight domain")]
    IndexOutOfDomain { index: i64 },
    #[error("weight at index {index} is not finite")]
    NonFiniteWeight { index: i64 },
    #[error("no closed form is available for this weight generator")]
    ExactUnavailable,
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("step function cells do not refine to an integer grid")]
    NonUnitGrid,
    #[error("operation requires an Lp space, got a sup-norm space")]
    SupNormMismatch,
    #[error("tail structure does not determine periodicity")]
    UndecidableTail,
    #[error("map is not injective at atom {atom}")]
    NonInjectiveMap { atom: i64 },
    #[error("bilateral weight vanishes at index {index}")]
    ZeroWeightBilateral { index: i64 },
    #[error("family of sets is empty")]
    EmptyFamily,
    #[error("malformed certificate: {0}")]
    MalformedCertificate(String),
    #[error("weight at index {index} is not strictly positive")]
    NonpositiveWeight { index: i64 },
    #[error("system has no dissipative part")]
    NoDissipativePart,
    #[error("the series a_n does not converge over the scanned range")]
    DivergentASeries,
    #[error("the orbit sum does not converge over the scanned range")]
    DivergentSum,
    #[error("support size {size} exceeds the cap {cap}")]
    SupportExplosion { size: usize, cap: usize },
    #[error("window of dimension {dim} exceeds the cap {cap}")]
    WindowTooLarge { dim: usize, cap: usize },
    #[error("no interior atoms remain after boundary exclusion")]
    BoundaryContamination,
}

pub type Result<T> = std::result::Result<T, Error>;
