use super::{EmbedError, EmbeddingStore, Result, TokenEmbeddingMatrix};

fn norm(v: &[f32]) -> f64 {
    v.iter()
        .map(|&x| (x as f64) * (x as f64))
        .sum::<f64>()
        .sqrt()
}

fn dot(u: &[f32], v: &[f32]) -> f64 {
    u.iter().zip(v).map(|(&a, &b)| a as f64 * b as f64).sum()
}

/// Cosine similarity in f64, clamped to [-1, 1].
pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(EmbedError::DimMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(EmbedError::ZeroNorm);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BertScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Greedy-matching BERTScore without IDF weighting or baseline rescaling.
///
/// Recall averages, over reference rows, the best cosine to any candidate
/// row; precision does the same from the candidate side.
pub fn bert_score(
    reference: &TokenEmbeddingMatrix,
    candidate: &TokenEmbeddingMatrix,
) -> Result<BertScore> {
    if reference.dim() != candidate.dim() {
        return Err(EmbedError::DimMismatch {
            expected: reference.dim(),
            found: candidate.dim(),
        });
    }
    let ref_norms: Vec<f64> = reference.iter_rows().map(norm).collect();
    let cand_norms: Vec<f64> = candidate.iter_rows().map(norm).collect();
    let mut best_for_ref = vec![f64::NEG_INFINITY; reference.rows()];
    let mut best_for_cand = vec![f64::NEG_INFINITY; candidate.rows()];
    for (i, r) in reference.iter_rows().enumerate() {
        for (j, c) in candidate.iter_rows().enumerate() {
            let sim = (dot(r, c) / (ref_norms[i] * cand_norms[j])).clamp(-1.0, 1.0);
            best_for_ref[i] = best_for_ref[i].max(sim);
            best_for_cand[j] = best_for_cand[j].max(sim);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let recall = mean(&best_for_ref);
    let precision = mean(&best_for_cand);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(BertScore {
        precision,
        recall,
        f1,
    })
}

/// Cosine between two single-row sentence embeddings.
pub fn sentence_similarity(store: &EmbeddingStore, id_a: &str, id_b: &str) -> Result<f64> {
    let sentence = |id: &str| -> Result<&TokenEmbeddingMatrix> {
        let m = store.require(id)?;
        if m.rows() != 1 {
            return Err(EmbedError::NotSentence {
                id: id.to_string(),
                rows: m.rows(),
            });
        }
        Ok(m)
    };
    let (a, b) = (sentence(id_a)?, sentence(id_b)?);
    cosine(a.row(0), b.row(0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BertIBleuConfig {
    beta: f64,
    diversity_floor: f64,
}

impl BertIBleuConfig {
    pub fn new(beta: f64, diversity_floor: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(EmbedError::InvalidConfig(format!(
                "beta must be positive, got {beta}"
            )));
        }
        if !(diversity_floor > 0.0 && diversity_floor < 1.0) {
            return Err(EmbedError::InvalidConfig(format!(
                "diversity floor must be in (0, 1), got {diversity_floor}"
            )));
        }
        Ok(Self {
            beta,
            diversity_floor,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn diversity_floor(&self) -> f64 {
        self.diversity_floor
    }
}

impl Default for BertIBleuConfig {
    fn default() -> Self {
        Self {
            beta: 4.0,
            diversity_floor: 1e-4,
        }
    }
}

/// Weighted harmonic mean of BERTScore F1 (weight beta) and diversity
/// `1 - self_bleu` (weight 1). Diversity is floored before inversion so a
/// verbatim copy scores near zero instead of dividing by zero.
pub fn bert_ibleu(bertscore_f1: f64, self_bleu: f64, cfg: &BertIBleuConfig) -> Result<f64> {
    if !(bertscore_f1 > 0.0 && bertscore_f1 <= 1.0) {
        return Err(EmbedError::InvalidScore(format!(
            "BERTScore F1 must be in (0, 1], got {bertscore_f1}"
        )));
    }
    if !(0.0..=1.0).contains(&self_bleu) {
        return Err(EmbedError::InvalidScore(format!(
            "self-BLEU must be in [0, 1], got {self_bleu}"
        )));
    }
    let diversity = (1.0 - self_bleu).max(cfg.diversity_floor);
    let weighted_inverse = (cfg.beta / bertscore_f1 + 1.0 / diversity) / (cfg.beta + 1.0);
    Ok(1.0 / weighted_inverse)
}
