use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. The CLI maps these onto exit codes:
/// input/parse problems exit 2, schema mismatches exit 3, data problems
/// (such as single-class training sets) exit 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sentence")]
    EmptySentence,

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("need at least 3 pairs to populate train/dev/test, got {0}")]
    TooFewPairs(usize),

    #[error("split ratios must sum to 1, got {0}")]
    BadRatios(f64),

    #[error("vector length mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),

    #[error("alpha must be in (0, 1], got {0}")]
    BadAlpha(f64),

    #[error("phrase length must be in 1..=5, got {0}")]
    BadPhraseLength(usize),

    #[error("feature schema mismatch: expected fingerprint {expected}, got {actual}")]
    SchemaMismatch { expected: String, actual: String },

    #[error("training data is empty")]
    EmptyTrainingSet,

    #[error("training labels contain a single class")]
    SingleClass,

    #[error("SMO did not converge after {sweeps} full sweeps")]
    NonConvergence { sweeps: usize },

    #[error("evaluation input is empty")]
    EmptyEvalSet,

    #[error("unknown classifier kind {0:?}")]
    UnknownClassifier(String),

    #[error("unknown feature group {0:?}")]
    UnknownGroup(String),

    #[error("{0}")]
    Invalid(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
