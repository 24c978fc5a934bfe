use thiserror::Error;

/// Errors raised by models, moment computations, bounds and estimators.
#[derive(Debug, Error)]
pub enum UrnError {
    #[error("unknown model family `{0}` (expected uniform, zipf, geom, sqrtgeom, fastvar, poisson or explicit)")]
    UnknownFamily(String),
    #[error("malformed model spec `{spec}`: {reason}")]
    MalformedSpec { spec: String, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("symbol index exceeds the representable range")]
    IndexOverflow,
    #[error("model has no regular-variation metadata")]
    NoRvMeta,
    #[error("no asymptotic equivalents are available for this model")]
    NoAsymptotics,
    #[error("singular denominator: {0}")]
    Singular(String),
    #[error("setting mismatch: {0}")]
    Setting(String),
    #[error("lambda {lambda} is outside the validity range (limit {limit})")]
    OutOfRange { lambda: f64, limit: f64 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, UrnError>;
