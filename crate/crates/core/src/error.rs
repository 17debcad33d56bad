use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("spin system needs between 2 and 16 spins, got {0}")]
    SpinCount(usize),
    #[error("duplicate spin name {0:?}")]
    DuplicateSpin(String),
    #[error("unknown spin {0:?}")]
    UnknownSpin(String),
    #[error("invalid spin parameter for {spin}: {reason}")]
    InvalidSpin { spin: String, reason: String },
    #[error("coupling table is not symmetric for spins {0} and {1}")]
    AsymmetricCoupling(String, String),
    #[error("no coupling given for spins {0} and {1}")]
    MissingCoupling(String, String),
    #[error("spin {0} cannot be coupled to itself")]
    SelfCoupling(String),
    #[error("degenerate transitions in the sub-spectrum of spin {spin} at {freq_hz} Hz")]
    DegenerateTransitions { spin: String, freq_hz: f64 },
    #[error("invalid basis state {0:?}")]
    InvalidState(String),
    #[error("invalid peak label {0:?}")]
    InvalidLabel(String),
    #[error("infeasible peak-order target: {0}")]
    Infeasible(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("transition does not belong to this {0}-qubit system")]
    ForeignTransition(usize),
    #[error("malformed gate spec: {0}")]
    MalformedGate(String),
    #[error(
        "unsupported rotation angle {0} rad; only population-exchanging pi pulses are modelled"
    )]
    UnsupportedAngle(f64),
    #[error("unknown species {0:?}")]
    UnknownSpecies(String),
    #[error("frequency grid does not cover {freq_hz} Hz")]
    GridTooNarrow { freq_hz: f64 },
    #[error("spectra are not on the same frequency grid")]
    GridMismatch,
    #[error("species mismatch: {0} vs {1}")]
    SpeciesMismatch(String, String),
    #[error("signal-to-noise ratio undefined: no noise in the noise window")]
    UndefinedSnr,
    #[error("noise window {0}..{1} Hz is outside the grid or too short")]
    BadNoiseWindow(f64, f64),
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
