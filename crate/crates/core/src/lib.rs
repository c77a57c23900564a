//! Paraphrase corpus curation.
//!
//! The crate covers the whole offline workflow around a back-translated
//! paraphrase corpus: corpus files and splits ([`corpus`]), text
//! normalization ([`textnorm`]), surface metrics ([`ngram`]), embedding
//! metrics over precomputed vectors ([`embed`]), the four-stage filter
//! ([`filter`]), threshold tooling ([`sweep`]), masked-LM augmentation
//! planning ([`augment`]) and metric reports ([`report`]).
//!
//! No model inference happens here. Embeddings, POS tags and mask fills are
//! read from files produced elsewhere.

pub mod augment;
pub mod corpus;
pub mod embed;
pub mod filter;
pub mod ngram;
pub mod report;
pub mod sweep;
pub mod textnorm;

pub use corpus::{Corpus, SentencePair};
pub use embed::{EmbeddingStore, TokenEmbeddingMatrix};
pub use filter::{FilterConfig, FilterOutcome, PipelineStats, Stage};
pub use textnorm::TokenSeq;
