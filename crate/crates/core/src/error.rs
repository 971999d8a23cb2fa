use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-positive eigenvalue {0}")]
    NonPositiveEigenvalue(f64),
    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite (eigenvalues in [{min:e}, {max:e}])")]
    NotPositiveDefinite { min: f64, max: f64 },
    #[error("unsupported dimension {0}, expected 2 or 3")]
    BadDimension(usize),
    #[error("matrix is singular")]
    SingularMatrix,

    #[error("cage is not closed: {0}")]
    NotClosed(String),
    #[error("cage has wrong orientation (signed measure {0:e})")]
    WrongOrientation(f64),
    #[error("degenerate face {0}")]
    DegenerateFace(usize),
    #[error("point does not lie on face {0}")]
    PointNotOnFace(usize),
    #[error("degenerate source face {0}")]
    DegenerateSourceFace(usize),
    #[error("cage connectivity mismatch: {0}")]
    ConnectivityMismatch(String),

    #[error("coincident points")]
    CoincidentPoints,
    #[error("query point lies on face {0}")]
    SingularConfiguration(usize),
    #[error("adaptive quadrature did not converge within depth {0}")]
    NoConvergence(usize),
    #[error("{} point(s) outside the cage or too close to its boundary: {indices:?}", indices.len())]
    PointOutsideOrOnBoundary { indices: Vec<usize> },

    #[error("no valid sample points")]
    NoValidSamples,
    #[error("normal equations are singular")]
    SingularSystem,
    #[error("energy increased from {before:e} to {after:e}")]
    EnergyIncrease { before: f64, after: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable code, used in CLI and service error payloads.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonPositiveEigenvalue(_) => "NonPositiveEigenvalue",
            Error::NotSymmetric(_) => "NotSymmetric",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::BadDimension(_) => "BadDimension",
            Error::SingularMatrix => "SingularMatrix",
            Error::NotClosed(_) => "NotClosed",
            Error::WrongOrientation(_) => "WrongOrientation",
            Error::DegenerateFace(_) => "DegenerateFace",
            Error::PointNotOnFace(_) => "PointNotOnFace",
            Error::DegenerateSourceFace(_) => "DegenerateSourceFace",
            Error::ConnectivityMismatch(_) => "ConnectivityMismatch",
            Error::CoincidentPoints => "CoincidentPoints",
            Error::SingularConfiguration(_) => "SingularConfiguration",
            Error::NoConvergence(_) => "NoConvergence",
            Error::PointOutsideOrOnBoundary { .. } => "PointOutsideOrOnBoundary",
            Error::NoValidSamples => "NoValidSamples",
            Error::SingularSystem => "SingularSystem",
            Error::EnergyIncrease { .. } => "EnergyIncrease",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Parse { .. } => "ParseError",
            Error::Io(_) => "IoError",
        }
    }

    /// Failures of the numerics themselves, as opposed to rejected input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularConfiguration(_)
                | Error::NoConvergence(_)
                | Error::SingularSystem
                | Error::EnergyIncrease { .. }
                | Error::CoincidentPoints
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
