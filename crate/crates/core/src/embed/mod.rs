//! Embedding matrices, the binary embedding store, and the embedding-based
//! metrics (BERTScore, sentence similarity, BERT-iBLEU).
//!
//! Embeddings are produced outside this crate. A matrix row `i` belongs to
//! the producer's token `i`; nothing here re-tokenizes text for BERTScore.

mod format;
mod mock;
mod score;
mod store;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub use format::{load_store, read_store, save_store, write_store, MAGIC, VERSION};
pub use mock::{mock_embed, mock_token_vector, MockMode};
pub use score::{bert_ibleu, bert_score, cosine, sentence_similarity, BertIBleuConfig, BertScore};
pub use store::{candidate_key, source_key, EmbeddingStore, TokenEmbeddingMatrix};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("embedding {id:?} has a zero-norm or non-finite row {row}")]
    InvalidRow { id: String, row: usize },
    #[error("embedding {id:?} has no rows")]
    EmptyMatrix { id: String },
    #[error("embedding {id:?}: {len} values do not fill rows of dimension {dim}")]
    BadShape { id: String, len: usize, dim: usize },
    #[error("dimension must be positive")]
    ZeroDim,
    #[error("no embedding for id {0:?}")]
    MissingId(String),
    #[error("embedding {id:?} has {rows} rows, expected a single sentence vector")]
    NotSentence { id: String, rows: usize },
    #[error("duplicate embedding id {0:?}")]
    DuplicateId(String),
    #[error("invalid score: {0}")]
    InvalidScore(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("bad magic bytes {0:?}, expected \"PEMB\"")]
    BadMagic([u8; 4]),
    #[error("unsupported store version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated store while reading {0}")]
    Truncated(&'static str),
    #[error("{0} unexpected trailing bytes after last record")]
    TrailingBytes(usize),
    #[error("invalid UTF-8 in {0}")]
    InvalidUtf8(&'static str),
    #[error("{what} is {len} bytes, longer than the 65535-byte limit")]
    TooLong { what: &'static str, len: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

pub type Result<T> = std::result::Result<T, EmbedError>;
