//! Corpus ingestion: normalization, tokenization, vocabulary, encoding,
//! splitting and batching of (original tweet, fact-checking reply) pairs.

mod batch;
mod dataset;
pub mod normalize;
mod split;
pub mod tokenize;
pub mod vocab;

use std::io;
use std::path::Path;

use thiserror::Error;

pub use batch::{batches, Batch, BatchIter};
pub use dataset::{
    encode_pair, format_dataset, parse_dataset, prepare, read_dataset, write_dataset, EncodedPair,
    Label, RawPair, SeqLimits,
};
pub use normalize::{normalize, Gazetteer};
pub use split::{split_dataset, Split, SplitSpec};
pub use tokenize::tokenize;
pub use vocab::{build_vocabulary, Vocabulary, BOS, EOS, PAD, UNK};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus contains no tokens")]
    EmptyCorpus,
    #[error("min_count must be at least 1")]
    BadMinCount,
    #[error("reply text is empty after normalization")]
    EmptyReply,
    #[error("original text is empty after normalization")]
    EmptySource,
    #[error("{}line {line}: {msg}", file.as_ref().map(|f| format!("{f}: ")).unwrap_or_default())]
    Parse {
        file: Option<String>,
        line: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("splitting requires at least 10 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("invalid split ratios: {0}")]
    BadSplit(String),
    #[error("batch size must be at least 1")]
    BadBatchSize,
}

impl CorpusError {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        CorpusError::Parse {
            file: None,
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        CorpusError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn in_file(self, path: &Path) -> Self {
        match self {
            CorpusError::Parse { line, msg, .. } => CorpusError::Parse {
                file: Some(path.display().to_string()),
                line,
                msg,
            },
            other => other,
        }
    }
}
