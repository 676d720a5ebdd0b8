use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("quadrature too coarse: {points} nodes cannot resolve a basis of dimension {dim} (need at least {required})")]
    QuadratureResolution {
        points: usize,
        dim: usize,
        required: usize,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular Crank-Nicolson step matrix at substep {substep}")]
    SingularStep { substep: usize },

    #[error("fixed-point iteration is not contracting: residual ratio >= 1 for {consecutive} consecutive iterations (last residual {residual:.3e})")]
    NonContraction { consecutive: usize, residual: f64 },

    #[error("fixed-point iteration did not reach tolerance {tolerance:.3e} in {iterations} iterations (last residual {residual:.3e})")]
    MaxIterations {
        iterations: usize,
        tolerance: f64,
        residual: f64,
    },

    #[error("trajectory-space dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("singular value computation failed: {0}")]
    SingularValues(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures of the numerical fixed-point machinery.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonContraction { .. }
                | Error::MaxIterations { .. }
                | Error::SingularStep { .. }
                | Error::SingularValues(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
