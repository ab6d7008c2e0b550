use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("vocabulary too small for negative sampling: {0} distinct tokens")]
    VocabTooSmall(usize),

    #[error("no seed dictionary; languages may not share script")]
    NoSeedDictionary,

    #[error("degenerate seed dictionary")]
    DegenerateDictionary,

    #[error("out-of-vocabulary token id {0}")]
    OutOfVocab(u32),

    #[error("no candidates")]
    NoCandidates,

    #[error("empty batch")]
    EmptyBatch,

    #[error("non-finite loss at version {version}: learning rate too high? (lr={lr})")]
    NonFiniteLoss { version: u64, lr: f64 },

    #[error("empty word")]
    EmptyWord,

    #[error("no words")]
    NoWords,

    #[error("undefined correlation")]
    UndefinedCorrelation,

    #[error("ground truth required")]
    TruthRequired,

    #[error("empty input")]
    EmptyInput,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    RawIo(#[from] io::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
