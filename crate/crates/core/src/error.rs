use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("empty or inverted box")]
    EmptyBox,

    #[error("flow of x^2 reaches its pole (tau * x = {product} >= 1)")]
    PoleReached { product: f64 },

    #[error("trajectory left the guard ball of radius {radius} at t = {time}")]
    BlowUpGuard { radius: f64, time: f64 },

    #[error("leg {index}: {source}")]
    Leg {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("convergence fit needs positive errors, got {0}")]
    NonPositiveError(f64),

    #[error("convergence fit needs at least {needed} distinct step counts, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("sum fit stopped at the term budget with sup residual {best}")]
    BudgetExceeded { best: f64 },

    #[error("axis out of range: {0}")]
    AxisOutOfRange(String),

    #[error("integrand mass outside the quadrature box is {tail}, above {tol}")]
    TailMassTooLarge { tail: f64, tol: f64 },

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("target {index} is {distance} away from its anchor, radius is {radius}")]
    TargetOutsideRadius {
        index: usize,
        distance: f64,
        radius: f64,
    },

    #[error("steering failed: {0}")]
    SteeringFailed(String),

    #[error("residual {achieved} exceeds tolerance {tolerance}")]
    ToleranceNotMet { achieved: f64, tolerance: f64 },

    #[error("invalid interpolation problem: {0}")]
    InvalidProblem(String),

    #[error("unsupported family for this construction: {0}")]
    UnsupportedFamily(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_leg(self, index: usize) -> Self {
        Error::Leg {
            index,
            source: Box::new(self),
        }
    }

    /// Strips `Leg` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Leg { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
