use thiserror::Error;

use crate::dynamics::LiftPoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value produced at step {step} (last finite point {last:?})")]
    NonFinite { step: usize, last: LiftPoint },
    #[error("iteration count {requested} exceeds cap {cap}")]
    OrbitCapExceeded { requested: u64, cap: u64 },
    #[error("empty seed set")]
    EmptySeedSet,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("expression error: {0}")]
    Expression(String),

    #[error("singular Newton system (Df^q - I not invertible) at {at:?}")]
    SingularJacobian { at: LiftPoint },
    #[error("Newton did not converge after {iters} iterations (residual {residual:e})")]
    NotConverged { iters: usize, residual: f64 },
    #[error("converged to an orbit of period {period} dividing q = {q}")]
    PeriodDivisor { period: usize, q: usize },
    #[error("periodicity residual {residual:e} exceeds {tol:e}")]
    ResidualTooLarge { residual: f64, tol: f64 },
    #[error("a zero of the displacement field lies on the sampling circle")]
    ZeroVectorOnCircle,
    #[error("total turning {turns} is not close to an integer")]
    AmbiguousWinding { turns: f64 },

    #[error("orbit is not hyperbolic")]
    NotHyperbolic,
    #[error("invalid eps {0}")]
    InvalidEps(f64),
    #[error("branch point cap {cap} exceeded")]
    PointCapExceeded { cap: usize },
    #[error("no crossing found within arclength cap {cap}")]
    NotFoundWithinCap { cap: f64 },

    #[error("branch growth failed: {0}")]
    BranchGrowthFailed(String),
    #[error("grid resolution {h} too coarse for band height {band}")]
    ResolutionTooCoarse { h: f64, band: f64 },
    #[error("empty point cloud")]
    EmptyCloud,

    #[error("invalid band width {0}")]
    InvalidBand(f64),
    #[error("region has no frontier on the {0} side")]
    NoFrontier(&'static str),

    #[error("store I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("store integrity error: {0}")]
    Integrity(String),
    #[error("invalid record id {0:?}")]
    InvalidId(String),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag, used in CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonFinite { .. } => "NonFinite",
            Error::OrbitCapExceeded { .. } => "OrbitCapExceeded",
            Error::EmptySeedSet => "EmptySeedSet",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Expression(_) => "Expression",
            Error::SingularJacobian { .. } => "SingularJacobian",
            Error::NotConverged { .. } => "NotConverged",
            Error::PeriodDivisor { .. } => "PeriodDivisor",
            Error::ResidualTooLarge { .. } => "ResidualTooLarge",
            Error::ZeroVectorOnCircle => "ZeroVectorOnCircle",
            Error::AmbiguousWinding { .. } => "AmbiguousWinding",
            Error::NotHyperbolic => "NotHyperbolic",
            Error::InvalidEps(_) => "InvalidEps",
            Error::PointCapExceeded { .. } => "PointCapExceeded",
            Error::NotFoundWithinCap { .. } => "NotFoundWithinCap",
            Error::BranchGrowthFailed(_) => "BranchGrowthFailed",
            Error::ResolutionTooCoarse { .. } => "ResolutionTooCoarse",
            Error::EmptyCloud => "EmptyCloud",
            Error::InvalidBand(_) => "InvalidBand",
            Error::NoFrontier(_) => "NoFrontier",
            Error::Io(_) => "IoError",
            Error::Integrity(_) => "IntegrityError",
            Error::InvalidId(_) => "InvalidId",
            Error::Json(_) => "Json",
        }
    }
}
