use std::path::PathBuf;

/// Errors produced by any stage of the rewriting pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed label `{text}`: {reason}")]
    MalformedLabel { text: String, reason: String },

    #[error("alignment mismatch at sentence {sentence}: {detail}")]
    Alignment { sentence: usize, detail: String },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("no rewriter supplied to the cascade")]
    NoRewriterSupplied,

    #[error("empty candidate list")]
    EmptyCandidateList,

    #[error("unknown character `{0}` and the model forbids an open vocabulary")]
    UnknownCharacter(char),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("corpus format: {0}")]
    CorpusFormat(String),

    #[error("table format: {0}")]
    TableFormat(String),

    #[error("model format: {0}")]
    ModelFormat(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{component}: {source}")]
    Component {
        component: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Attaches the name of the pipeline component the error came from.
    pub fn in_component(self, component: &'static str) -> Self {
        Error::Component { component, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
