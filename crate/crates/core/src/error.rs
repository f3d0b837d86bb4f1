use thiserror::Error;

/// Errors raised by design, simulation and evaluation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("constraint matrix is rank deficient (numerical rank {rank} of {constraints})")]
    RankDeficient { rank: usize, constraints: usize },

    #[error("matrix is not Hermitian (relative asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("non-negligible imaginary part {0:.3e} in a real-valued quantity")]
    ImaginaryResidue(f64),

    #[error("zero polynomial has no roots")]
    ZeroPolynomial,

    #[error("too few snapshots: {got} rows, need at least {need}")]
    TooFewSnapshots { got: usize, need: usize },

    #[error("duplicate constraint frequency {0}")]
    DuplicateFrequency(f64),

    #[error("signal has zero power")]
    ZeroPower,

    #[error("no targets in ground truth")]
    NoTargets,

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable identifier, used for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::NotPositiveDefinite => "not_positive_definite",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::NotHermitian(_) => "not_hermitian",
            Error::ImaginaryResidue(_) => "imaginary_residue",
            Error::ZeroPolynomial => "zero_polynomial",
            Error::TooFewSnapshots { .. } => "too_few_snapshots",
            Error::DuplicateFrequency(_) => "duplicate_frequency",
            Error::ZeroPower => "zero_power",
            Error::NoTargets => "no_targets",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
