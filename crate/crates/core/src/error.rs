use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no base station is awake; {detached} UEs detached")]
    AllAsleep { detached: usize },

    #[error("metric window is empty")]
    EmptyWindow,

    #[error("empty input")]
    EmptyInput,

    #[error("degenerate series: {0} is constant")]
    DegenerateSeries(&'static str),

    #[error("group too small: {size} samples, need at least 2")]
    GroupTooSmall { size: usize },

    #[error("action index {index} refers to a stale action space (digest {got}, active {active})")]
    StaleDigest {
        index: usize,
        got: String,
        active: String,
    },

    #[error("replay memory holds {fill} transitions, sampling needs {needed}")]
    InsufficientFill { fill: usize, needed: usize },

    #[error("non-finite loss {loss} at training step {step}")]
    NonFiniteLoss { loss: f64, step: u64 },

    #[error("non-finite value for {what} at episode {episode}, step {step}, tti {tti}")]
    NonFinite {
        what: &'static str,
        episode: u64,
        step: u64,
        tti: u64,
    },

    #[error("action space has {count} combinations, above the cap of {cap}")]
    ComboExplosion { count: u128, cap: u64 },

    #[error("malformed file {path}: {detail}")]
    Malformed { path: PathBuf, detail: String },

    #[error("unsupported schema_version {found} in {path} (expected {expected})")]
    Schema {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("refusing to export an empty action space")]
    EmptyActionSpace,

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
