use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("index {index} out of range for {len} particles")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("model requires a chemical field but the ensemble carries none")]
    MissingChemicalField,

    #[error("non-finite value in {what} at step {step}")]
    NonFinite { what: &'static str, step: usize },

    #[error("CFL condition violated in {section}: {number:.4} > {limit}")]
    Cfl { section: &'static str, number: f64, limit: f64 },

    #[error("mass drift {drift:.3e} exceeds {limit:.1e} in {section}")]
    MassDrift { section: &'static str, drift: f64, limit: f64 },

    #[error("position {coordinate} outside the non-periodic box [{lo}, {hi}]")]
    OutsideBox { coordinate: f64, lo: f64, hi: f64 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("exact solver supports at most {limit} atoms per side, got {got}")]
    SizeExceeded { limit: usize, got: usize },

    #[error("{0}")]
    Unsupported(String),

    #[error("elliptic solve failed: {0}")]
    Elliptic(String),

    #[error("replica {replica}: {source}")]
    Replica {
        replica: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("sweep point eps_p = {eps_p}: {source}")]
    SweepPoint {
        eps_p: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("rate fit failed: {0}")]
    RateFit(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// True for failures raised by a solver while running, as opposed to bad
    /// input or configuration.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonFinite { .. }
            | Error::Cfl { .. }
            | Error::MassDrift { .. }
            | Error::Elliptic(_)
            | Error::RateFit(_)
            | Error::OutsideBox { .. } => true,
            Error::Replica { source, .. } | Error::SweepPoint { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
