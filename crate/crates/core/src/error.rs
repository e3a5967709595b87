use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("utterance too short")]
    UtteranceTooShort,
    #[error("corrupt audio: {0}")]
    CorruptAudio(String),
    #[error("unsupported audio format: {0}")]
    AudioFormat(String),
    #[error("sample rate mismatch: expected {expected} Hz, got {actual} Hz")]
    SampleRateMismatch { expected: u32, actual: u32 },
    #[error("alignment infeasible")]
    AlignmentInfeasible,
    #[error("training diverged")]
    TrainingDiverged,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("lexicon error at line {line}: {message}")]
    Lexicon { line: usize, message: String },
    #[error("out-of-vocabulary token: {0}")]
    OutOfVocab(String),
    #[error("undefined WER: empty reference with non-empty hypothesis")]
    UndefinedWer,
    #[error("no informative features")]
    NoInformativeFeatures,
    #[error("transcript parse error at line {line}: {message}")]
    Transcript { line: usize, message: String },
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("model file error: {0}")]
    ModelFile(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
