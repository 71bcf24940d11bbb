use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty audio")]
    EmptyAudio,
    #[error("bad segmentation config: {0}")]
    BadSegmentationConfig(String),
    #[error("invalid audio: {0}")]
    InvalidAudio(String),
    #[error("span {start}..{end} is not valid for a clip of {len} samples")]
    InvalidSpan { start: usize, end: usize, len: usize },
    #[error("wav: {0}")]
    Wav(String),

    #[error("invalid state list: {0}")]
    InvalidStates(String),
    #[error("hidden layer width must be at least 1")]
    ZeroHidden,
    #[error("non-finite input component at index {0}")]
    NonFiniteInput(usize),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("label {label} out of range for {states} states")]
    LabelOutOfRange { label: usize, states: usize },
    #[error("diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("model file line {line}: {msg}")]
    ModelFormat { line: usize, msg: String },

    #[error("unknown agent id {0}")]
    UnknownAgent(usize),
    #[error("unknown emotional state {0:?}")]
    UnknownState(String),
    #[error("invalid placement: {0}")]
    InvalidPlacement(String),
    #[error("invalid troupe: {0}")]
    InvalidTroupe(String),
    #[error("invalid sequence config: {0}")]
    InvalidSequenceConfig(String),
    #[error("invalid fragment {id:?}: {msg}")]
    InvalidFragment { id: String, msg: String },

    #[error("script parse error at line {line}, column {column}: {msg}")]
    ScriptParse { line: usize, column: usize, msg: String },
    #[error("script has no sequences")]
    NoSequences,
    #[error("invalid script: {0}")]
    InvalidScript(String),

    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("session log line {line}: {msg}")]
    LogFormat { line: usize, msg: String },
    #[error("hash mismatch for {what}: log has {expected}, supplied artifact hashes to {actual}")]
    HashMismatch {
        what: &'static str,
        expected: String,
        actual: String,
    },
    #[error("invalid engine config: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image: {0}")]
    Image(String),
    #[error("csv: {0}")]
    Csv(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
