use thiserror::Error;

/// Errors raised by the core library.
///
/// Parameter-domain problems each get their own variant so callers (the CLI
/// in particular) can map them to a usage error without string matching.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension d = {0} is not supported (need d >= 3)")]
    Dimension(usize),
    #[error("interaction order s = {s} must lie strictly between 1 and d/2 = {half_d}")]
    InteractionOrder { s: f64, half_d: f64 },
    #[error("regularization epsilon = {0} must be finite and nonnegative")]
    Regularization(f64),
    #[error("{name} must be finite and positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("profile has {got} values but the grid has {expected} cells")]
    ProfileLength { expected: usize, got: usize },
    #[error("density at cell {index} is {value}; densities must be finite and nonnegative")]
    InvalidDensity { index: usize, value: f64 },
    #[error("profiles or kernels are defined on different grids")]
    GridMismatch,
    #[error("norm exponent q = {0} must be at least 1")]
    NormExponent(f64),
    #[error("HLS exponent beta = {beta} must lie strictly between 0 and d = {d}")]
    HlsExponent { d: usize, beta: f64 },
    #[error("calibration needs an unregularized kernel, got epsilon = {0}")]
    RegularizedKernel(f64),
    #[error("calibration failed: origin potential is not positive ({0})")]
    Calibration(f64),
    #[error("kernel with {0} entries cannot be allocated")]
    Resource(usize),
    #[error("scheme produced density {value} at cell {index} (t = {t})")]
    Integrity { t: f64, index: usize, value: f64 },
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("kernel cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than a numerical failure.
    pub fn is_domain_error(&self) -> bool {
        !matches!(
            self,
            Error::Integrity { .. }
                | Error::Calibration(_)
                | Error::Resource(_)
                | Error::Cache(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
