use indexmap::IndexMap;

use super::{EmbedError, Result};

/// Store key holding the source-side embedding of pair `id`.
pub fn source_key(pair_id: &str) -> String {
    format!("{pair_id}:src")
}

/// Store key holding the candidate-side embedding of pair `id`.
pub fn candidate_key(pair_id: &str) -> String {
    format!("{pair_id}:cand")
}

/// A `rows x dim` matrix of token vectors, row-major. A single row is a
/// sentence embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddingMatrix {
    sentence_id: String,
    dim: usize,
    data: Vec<f32>,
}

impl TokenEmbeddingMatrix {
    /// Every row must be finite with a nonzero norm.
    pub fn new(sentence_id: impl Into<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        let sentence_id = sentence_id.into();
        if dim == 0 {
            return Err(EmbedError::ZeroDim);
        }
        if data.is_empty() {
            return Err(EmbedError::EmptyMatrix { id: sentence_id });
        }
        if !data.len().is_multiple_of(dim) {
            return Err(EmbedError::BadShape {
                id: sentence_id,
                len: data.len(),
                dim,
            });
        }
        for (row, values) in data.chunks_exact(dim).enumerate() {
            let finite = values.iter().all(|v| v.is_finite());
            if !finite || values.iter().all(|&v| v == 0.0) {
                return Err(EmbedError::InvalidRow {
                    id: sentence_id,
                    row,
                });
            }
        }
        Ok(Self {
            sentence_id,
            dim,
            data,
        })
    }

    pub fn from_rows(sentence_id: impl Into<String>, rows: &[Vec<f32>]) -> Result<Self> {
        let sentence_id = sentence_id.into();
        let dim = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| EmbedError::EmptyMatrix {
                id: sentence_id.clone(),
            })?;
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(EmbedError::DimMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        Self::new(sentence_id, dim, rows.concat())
    }

    pub fn sentence_id(&self) -> &str {
        &self.sentence_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dim)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn with_id(mut self, sentence_id: impl Into<String>) -> Self {
        self.sentence_id = sentence_id.into();
        self
    }
}

/// Embedding matrices keyed by sentence id, all of one dimension.
/// Iteration follows insertion order, which is also the on-disk order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    provenance: String,
    entries: IndexMap<String, TokenEmbeddingMatrix>,
}

impl EmbeddingStore {
    pub fn new(dim: usize, provenance: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(EmbedError::ZeroDim);
        }
        Ok(Self {
            dim,
            provenance: provenance.into(),
            entries: IndexMap::new(),
        })
    }

    pub fn insert(&mut self, matrix: TokenEmbeddingMatrix) -> Result<()> {
        if matrix.dim() != self.dim {
            return Err(EmbedError::DimMismatch {
                expected: self.dim,
                found: matrix.dim(),
            });
        }
        if self.entries.contains_key(matrix.sentence_id()) {
            return Err(EmbedError::DuplicateId(matrix.sentence_id().to_string()));
        }
        self.entries
            .insert(matrix.sentence_id().to_string(), matrix);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&TokenEmbeddingMatrix> {
        self.entries.get(id)
    }

    pub fn require(&self, id: &str) -> Result<&TokenEmbeddingMatrix> {
        self.get(id)
            .ok_or_else(|| EmbedError::MissingId(id.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &TokenEmbeddingMatrix> {
        self.entries.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_validation() {
        assert!(TokenEmbeddingMatrix::new("a", 2, vec![1.0, 0.0, 0.0, 1.0]).is_ok());
        assert!(matches!(
            TokenEmbeddingMatrix::new("a", 2, vec![1.0, 0.0, 0.0]),
            Err(EmbedError::BadShape { .. })
        ));
        assert!(matches!(
            TokenEmbeddingMatrix::new("a", 2, vec![1.0, 0.0, 0.0, 0.0]),
            Err(EmbedError::InvalidRow { row: 1, .. })
        ));
        assert!(matches!(
            TokenEmbeddingMatrix::new("a", 2, vec![f32::NAN, 1.0]),
            Err(EmbedError::InvalidRow { row: 0, .. })
        ));
        assert!(matches!(
            TokenEmbeddingMatrix::new("a", 2, vec![]),
            Err(EmbedError::EmptyMatrix { .. })
        ));
        assert!(matches!(
            TokenEmbeddingMatrix::new("a", 0, vec![1.0]),
            Err(EmbedError::ZeroDim)
        ));
    }

    #[test]
    fn store_enforces_dim_and_unique_ids() {
        let mut store = EmbeddingStore::new(2, "test").unwrap();
        store
            .insert(TokenEmbeddingMatrix::new("a", 2, vec![1.0, 0.0]).unwrap())
            .unwrap();
        assert!(matches!(
            store.insert(TokenEmbeddingMatrix::new("a", 2, vec![0.0, 1.0]).unwrap()),
            Err(EmbedError::DuplicateId(_))
        ));
        assert!(matches!(
            store.insert(TokenEmbeddingMatrix::new("b", 3, vec![0.0, 1.0, 0.0]).unwrap()),
            Err(EmbedError::DimMismatch {
                expected: 2,
                found: 3
            })
        ));
        assert!(matches!(store.require("zz"), Err(EmbedError::MissingId(_))));
        assert_eq!(source_key("p1"), "p1:src");
        assert_eq!(candidate_key("p1"), "p1:cand");
    }
}
