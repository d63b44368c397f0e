use std::io;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no resonance dip found (minimum transmission {min_transmission:.4} > 0.95)")]
    NoResonance { min_transmission: f64 },

    #[error("fit diverged: {0}")]
    FitDiverged(String),

    #[error("fit design matrix is rank deficient: {0}")]
    FitDegenerate(String),

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("effective mode number undefined for g2(0) = {0} (must exceed 1)")]
    ModeNumberUndefined(f64),

    #[error("no true coincidences: coincidences {coincidences} <= accidentals {accidentals}")]
    NoTrueCoincidences { coincidences: f64, accidentals: f64 },

    #[error("inconsistent loss budget: inferred emission probability {0} outside (0, 1]")]
    InconsistentBudget(f64),

    #[error("unstable estimate: {failed} of {trials} Monte Carlo trials failed")]
    UnstableEstimate { failed: usize, trials: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("event cap exceeded: {requested} records requested, cap is {cap}")]
    TooManyEvents { requested: u64, cap: u64 },

    #[error("malformed tag data at byte offset {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn with_path(path: &std::path::Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}
