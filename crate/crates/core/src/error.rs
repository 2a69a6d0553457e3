use thiserror::Error;

/// Errors raised by the shared domain types.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("box size must be positive, got w={w}, h={h}")]
    NonPositiveSize { w: f64, h: f64 },
    #[error("box coordinates must be finite")]
    NonFiniteBox,
    #[error("detection score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("history frames must strictly increase (last {last}, next {next})")]
    NonIncreasingFrame { last: u32, next: u32 },
    #[error("invalid sequence metadata: {0}")]
    InvalidMeta(String),
    #[error("dimension mismatch: expected {expected} values, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("non-finite value in feature data")]
    NonFiniteValue,
}

/// Crate-wide error, one variant per subsystem.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Features(#[from] crate::features::FeatureError),
    #[error(transparent)]
    Correlation(#[from] crate::correlation::CorrelationError),
    #[error(transparent)]
    Pyramid(#[from] crate::pyramid::PyramidError),
    #[error(transparent)]
    Head(#[from] crate::head::HeadError),
    #[error(transparent)]
    Assoc(#[from] crate::assoc::AssocError),
    #[error(transparent)]
    Train(#[from] crate::train::TrainError),
    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
    #[error(transparent)]
    Profile(#[from] crate::profile::ProfileError),
    #[error(transparent)]
    Synth(#[from] crate::synth::SynthError),
    #[error(transparent)]
    Mot(#[from] crate::mot::MotError),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable kind, used for JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Core(_) => "core",
            Error::Features(_) => "features",
            Error::Correlation(_) => "correlation",
            Error::Pyramid(_) => "pyramid",
            Error::Head(_) => "head",
            Error::Assoc(_) => "assoc",
            Error::Train(_) => "train",
            Error::Eval(_) => "eval",
            Error::Profile(_) => "profile",
            Error::Synth(_) => "synth",
            Error::Mot(_) => "mot",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
