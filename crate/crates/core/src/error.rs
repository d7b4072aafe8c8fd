use thiserror::Error;

/// Every failure mode surfaced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("warping function is not positive at r = {r} (f = {value})")]
    NonPositiveWarp { r: f64, value: f64 },
    #[error("radius {r} lies outside the open interval ({lower}, inf)")]
    DomainError { r: f64, lower: f64 },
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("spectrum truncation exceeded: x = {x} but catalog only covers up to {covered}")]
    TruncationExceeded { x: f64, covered: f64 },
    #[error("invalid spectrum data: {0}")]
    InvalidSpectrum(String),
    #[error("mode selection violated: rho^2 = {rho_sq} but k^2/4 = {expected}")]
    ModeSelectionViolation { rho_sq: f64, expected: f64 },
    #[error("step size underflow at t = {t} (h = {h})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("invalid integration request: {0}")]
    InvalidIntegration(String),
    #[error("trajectory norm vanishes on the fit window")]
    ZeroNormOnWindow,
    #[error("fit window holds {samples} samples, at least {required} required")]
    WindowTooSmall { samples: usize, required: usize },
    #[error("degenerate spectrum: most negative real parts tie ({0})")]
    DegenerateSpectrum(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("scalar curvature of the closed factor is not constant (inf = {inf}, sup = {sup})")]
    NonConstantScal { inf: f64, sup: f64 },
    #[error("closed factor dimension n = {0} must exceed 1")]
    InvalidFactorDimension(usize),
    #[error("two-sided matching failed: {0}")]
    MatchingFailure(String),
    #[error("mode sum truncation error: {0}")]
    TruncationError(String),
    #[error("evaluation shell too coarse: {0}")]
    ShellTooCoarse(String),
    #[error("extrapolation unstable: {0}")]
    ExtrapolationUnstable(String),
    #[error("quadrature did not converge: {0}")]
    QuadratureNotConverged(String),
    #[error("test function is not radial: {0}")]
    UnsupportedNonRadial(String),
    #[error("mass estimate {mass} is not positive beyond its uncertainty {uncertainty}")]
    MassNotPositive { mass: f64, uncertainty: f64 },
    #[error("gluing mismatch: {0}")]
    GluingMismatch(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("dimension {0} too small (Weyl tensor requires m >= 4)")]
    DimensionTooSmall(usize),
    #[error("invalid factorization: {0}")]
    InvalidFactorization(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
