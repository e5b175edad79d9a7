use thiserror::Error;

/// Errors raised by the toolkit. Variants carry enough context to explain
/// which precondition failed.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown parameter preset `{0}`")]
    UnknownPreset(String),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("position {x} outside tabulated potential range [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },
    #[error("invalid spectral configuration: {0}")]
    InvalidSpectrum(String),
    #[error("time step {dt} exceeds resolution limit {limit}")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("simulated time {t_final} reaches the mode-sum recurrence time {recurrence}")]
    Recurrence { t_final: f64, recurrence: f64 },
    #[error("snapshot times must be sorted and lie within [{t0}, {t_final}]")]
    SnapshotTimes { t0: f64, t_final: f64 },
    #[error("not enough samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("grid covers only {covered:.4} of the samples (need {required})")]
    Coverage { covered: f64, required: f64 },
    #[error("resolution precondition violated: {0}")]
    Resolution(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("support mask too small: {points} points (need {needed})")]
    MaskTooSmall { points: usize, needed: usize },
    #[error("density does not vanish at the domain boundary (relative value {0:e})")]
    SurfaceTerm(f64),
    #[error("CFL condition violated: {0}")]
    Cfl(String),
    #[error("density node formed inside the support at x = {x}; use the wave-function backend")]
    NodeFormation { x: f64 },
    #[error("support is disconnected into {0} components")]
    DisconnectedSupport(usize),
    #[error("Hermitian symmetry violated: max deviation {0:e}")]
    Symmetry(f64),
    #[error("ensemble is not stationary: windowed energy drift {drift:.4} exceeds {threshold}")]
    NotStationary { drift: f64, threshold: f64 },
    #[error("iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("potential is unbounded below or not finite on the grid")]
    UnboundedPotential,
    #[error("non-positive correlation factor at index {0}")]
    NonPositiveDensity(usize),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
