//! Deterministic hash embeddings for running the pipeline without a model.
//!
//! Token vector for token `t` in dimension `d`: for block `k = 0, 1, ...`
//! take `SHA-256(utf8(t) || k as u32 little-endian)`, read it as eight
//! little-endian `u32` words `w`, and map each to `w / 2^31 - 1`. Blocks are
//! concatenated, truncated to `d` values and scaled to unit length before
//! rounding to f32. Sentence vectors are the unit-scaled mean of the f32
//! token rows.

use std::str::FromStr;

use sha2::{Digest, Sha256};

use super::{Result, TokenEmbeddingMatrix};
use crate::textnorm::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockMode {
    Sentence,
    Tokens,
}

impl FromStr for MockMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sentence" => Ok(Self::Sentence),
            "tokens" => Ok(Self::Tokens),
            other => Err(format!(
                "unknown embedding mode {other:?} (expected sentence or tokens)"
            )),
        }
    }
}

/// Unit-length hash direction for one token.
pub fn mock_token_vector(token: &str, dim: usize) -> Vec<f32> {
    let mut raw: Vec<f64> = Vec::with_capacity(dim + 8);
    let mut block: u32 = 0;
    while raw.len() < dim {
        let mut hasher = Sha256::new();
        hasher.update(token.as_bytes());
        hasher.update(block.to_le_bytes());
        let digest = hasher.finalize();
        for word in digest.chunks_exact(4) {
            let w = u32::from_le_bytes(word.try_into().expect("4-byte word"));
            raw.push(w as f64 / 2f64.powi(31) - 1.0);
        }
        block += 1;
    }
    raw.truncate(dim);
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    raw.iter().map(|x| (x / norm) as f32).collect()
}

/// Embeds `text` by hashing its tokens. Text without tokens is embedded
/// as the single token `""`. `dim` must be at least 2.
pub fn mock_embed(
    id: impl Into<String>,
    text: &str,
    dim: usize,
    mode: MockMode,
) -> Result<TokenEmbeddingMatrix> {
    assert!(dim >= 2, "mock embeddings need dim >= 2");
    let tokens = tokenize(text).into_tokens();
    let tokens = if tokens.is_empty() {
        vec![String::new()]
    } else {
        tokens
    };
    let rows: Vec<Vec<f32>> = tokens.iter().map(|t| mock_token_vector(t, dim)).collect();
    match mode {
        MockMode::Tokens => TokenEmbeddingMatrix::from_rows(id, &rows),
        MockMode::Sentence => {
            let mut mean = vec![0f64; dim];
            for row in &rows {
                for (m, &x) in mean.iter_mut().zip(row) {
                    *m += x as f64;
                }
            }
            let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
            let sentence = if norm > 0.0 {
                mean.iter().map(|x| (x / norm) as f32).collect()
            } else {
                rows[0].clone()
            };
            TokenEmbeddingMatrix::from_rows(id, &[sentence])
        }
    }
}
