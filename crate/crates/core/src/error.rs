use num_complex::Complex64;

/// Library-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension {0}: truncated operators need dim >= 2")]
    InvalidDimension(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("laguerre domain: order alpha = {alpha} below -n for n = {n}")]
    LaguerreDomain { n: usize, alpha: i64 },
    #[error(
        "displacement magnitude overflow: |z|^2 = {got:.3e} exceeds the supported {limit:.3e}"
    )]
    MagnitudeOverflow { got: f64, limit: f64 },
    #[error("weight kind is not analytic at the origin: {0}")]
    UnsupportedWeight(String),
    #[error("custom weight carries no Taylor table; only quadrature pipelines accept it")]
    MissingTaylorData,
    #[error("weight evaluation failed: {0}")]
    WeightEval(String),
    #[error("series constant term must be 1, got {0}")]
    Normalization(Complex64),
    #[error("coefficient tables use different representations")]
    RepresentationMismatch,
    #[error("degree cap exceeded: {0}")]
    DegreeCap(String),
    #[error("grid parameters: {0}")]
    GridParams(String),
    #[error("grid self-calibration error {0:.3e} exceeds 1e-8")]
    GridCalibration(f64),
    #[error("operation requires a cartesian-uniform grid")]
    UnsupportedGrid,
    #[error("grid/field mismatch: field sampled on a different grid")]
    GridFieldMismatch,
    #[error("partial transform of a distribution-valued weight; use the closed-form kernel path")]
    DistributionalKind,
    #[error("weight does not decay: pass a damping schedule to integrate it")]
    DivergenceRisk,
    #[error("no closed-form path for this weight/symbol combination: {0}")]
    UnsupportedCombination(String),
    #[error("parse error at byte {at}: {msg}")]
    Parse { at: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
