//! Surface-form metrics over token sequences: n-gram sets, PINC, BLEU,
//! ROUGE-L and the n-gram repetition test.
//!
//! Everything here is generic over the token type so the same code runs on
//! [`TokenSeq`](crate::textnorm::TokenSeq) contents, `&str` slices or small
//! integer alphabets in tests.

use std::collections::{HashMap, HashSet};
use std::hash::Hash;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("candidate has no tokens")]
    EmptyCandidate,
    #[error("hypothesis has no tokens")]
    EmptyHypothesis,
    #[error("reference has no tokens")]
    EmptyReference,
    #[error("{references} reference sets for {hypotheses} hypotheses")]
    LengthMismatch {
        references: usize,
        hypotheses: usize,
    },
    #[error("reference set {0} is empty")]
    EmptyReferenceSet(usize),
    #[error("invalid metric configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, MetricError>;

/// Distinct contiguous windows of length `n`. Empty when `n` is zero or
/// longer than the sequence.
pub fn ngram_set<T: Eq + Hash>(tokens: &[T], n: usize) -> HashSet<&[T]> {
    if n == 0 || tokens.len() < n {
        return HashSet::new();
    }
    tokens.windows(n).collect()
}

/// Multiset of contiguous windows of length `n`.
pub fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], u64> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for window in tokens.windows(n) {
        *counts.entry(window).or_insert(0) += 1;
    }
    counts
}

/// True iff some window of length `n` occurs at least twice.
pub fn has_ngram_repeat<T: Eq + Hash>(tokens: &[T], n: usize) -> bool {
    if n == 0 || tokens.len() <= n {
        return false;
    }
    let mut seen = HashSet::with_capacity(tokens.len() - n + 1);
    tokens.windows(n).any(|w| !seen.insert(w))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PincConfig {
    max_n: usize,
}

impl PincConfig {
    pub const MAX_ORDER: usize = 8;

    pub fn new(max_n: usize) -> Result<Self> {
        if !(1..=Self::MAX_ORDER).contains(&max_n) {
            return Err(MetricError::InvalidConfig(format!(
                "PINC max_n must be in 1..={}, got {max_n}",
                Self::MAX_ORDER
            )));
        }
        Ok(Self { max_n })
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }
}

impl Default for PincConfig {
    fn default() -> Self {
        Self { max_n: 4 }
    }
}

/// PINC: mean over n = 1..=max_n of the fraction of distinct candidate
/// n-grams absent from the source. Orders for which the candidate has no
/// n-grams are left out of the mean.
pub fn pinc<T: Eq + Hash>(source: &[T], candidate: &[T], cfg: &PincConfig) -> Result<f64> {
    if candidate.is_empty() {
        return Err(MetricError::EmptyCandidate);
    }
    let mut total = 0.0;
    let mut levels = 0usize;
    for n in 1..=cfg.max_n.min(candidate.len()) {
        let cand = ngram_set(candidate, n);
        let src = ngram_set(source, n);
        let overlap = cand.iter().filter(|g| src.contains(*g)).count();
        total += 1.0 - overlap as f64 / cand.len() as f64;
        levels += 1;
    }
    Ok(total / levels as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BleuConfig {
    max_n: usize,
    smoothing_epsilon: f64,
    effective_order: bool,
}

impl BleuConfig {
    pub fn new(max_n: usize, smoothing_epsilon: f64, effective_order: bool) -> Result<Self> {
        if max_n == 0 {
            return Err(MetricError::InvalidConfig("BLEU max_n must be >= 1".into()));
        }
        if !(smoothing_epsilon > 0.0 && smoothing_epsilon.is_finite()) {
            return Err(MetricError::InvalidConfig(format!(
                "BLEU smoothing epsilon must be positive, got {smoothing_epsilon}"
            )));
        }
        Ok(Self {
            max_n,
            smoothing_epsilon,
            effective_order,
        })
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    pub fn smoothing_epsilon(&self) -> f64 {
        self.smoothing_epsilon
    }

    pub fn effective_order(&self) -> bool {
        self.effective_order
    }
}

impl Default for BleuConfig {
    fn default() -> Self {
        Self {
            max_n: 4,
            smoothing_epsilon: 0.1,
            effective_order: true,
        }
    }
}

/// Sufficient statistics for BLEU. Merging is associative and commutative,
/// so corpus statistics can be accumulated in any grouping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BleuStats {
    /// Clipped matches per order, index 0 is unigrams.
    pub matches: Vec<u64>,
    /// Hypothesis n-gram totals per order.
    pub totals: Vec<u64>,
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl BleuStats {
    pub fn zero(max_n: usize) -> Self {
        Self {
            matches: vec![0; max_n],
            totals: vec![0; max_n],
            hyp_len: 0,
            ref_len: 0,
        }
    }

    /// Statistics for one hypothesis against a reference set. Matches are
    /// clipped by the maximum count of each n-gram over the references; the
    /// reference length is the one closest to the hypothesis length, the
    /// shorter one on ties.
    pub fn for_sentence<T, R>(references: &[R], hypothesis: &[T], max_n: usize) -> Self
    where
        T: Eq + Hash,
        R: AsRef<[T]>,
    {
        let mut stats = Self::zero(max_n);
        stats.hyp_len = hypothesis.len() as u64;
        stats.ref_len = closest_ref_len(
            references.iter().map(|r| r.as_ref().len()),
            hypothesis.len(),
        ) as u64;
        for n in 1..=max_n {
            let hyp_counts = ngram_counts(hypothesis, n);
            if hyp_counts.is_empty() {
                continue;
            }
            let mut max_ref: HashMap<&[T], u64> = HashMap::new();
            for reference in references {
                for (gram, count) in ngram_counts(reference.as_ref(), n) {
                    let slot = max_ref.entry(gram).or_insert(0);
                    *slot = (*slot).max(count);
                }
            }
            let mut matched = 0;
            let mut total = 0;
            for (gram, count) in hyp_counts {
                total += count;
                matched += count.min(max_ref.get(gram).copied().unwrap_or(0));
            }
            stats.matches[n - 1] = matched;
            stats.totals[n - 1] = total;
        }
        stats
    }

    pub fn merge(&mut self, other: &BleuStats) {
        debug_assert_eq!(self.matches.len(), other.matches.len());
        for (a, b) in self.matches.iter_mut().zip(&other.matches) {
            *a += b;
        }
        for (a, b) in self.totals.iter_mut().zip(&other.totals) {
            *a += b;
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    /// BLEU score in [0, 1] from accumulated statistics.
    pub fn score(&self, cfg: &BleuConfig) -> f64 {
        if self.hyp_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        let mut order = 0usize;
        for (&matched, &total) in self.matches.iter().zip(&self.totals) {
            if total == 0 {
                if cfg.effective_order {
                    continue;
                }
                return 0.0;
            }
            let numerator = if matched == 0 {
                cfg.smoothing_epsilon
            } else {
                matched as f64
            };
            log_sum += (numerator / total as f64).ln();
            order += 1;
        }
        if order == 0 {
            return 0.0;
        }
        let brevity = (1.0 - self.ref_len as f64 / self.hyp_len as f64)
            .min(0.0)
            .exp();
        brevity * (log_sum / order as f64).exp()
    }
}

fn closest_ref_len(lengths: impl Iterator<Item = usize>, hyp_len: usize) -> usize {
    lengths
        .min_by_key(|&len| (len.abs_diff(hyp_len), len))
        .unwrap_or(0)
}

/// Smoothed sentence-level BLEU of `hypothesis` against one reference.
pub fn sentence_bleu<T: Eq + Hash>(
    reference: &[T],
    hypothesis: &[T],
    cfg: &BleuConfig,
) -> Result<f64> {
    sentence_bleu_multi(&[reference], hypothesis, cfg)
}

/// Smoothed sentence-level BLEU against several references.
pub fn sentence_bleu_multi<T, R>(
    references: &[R],
    hypothesis: &[T],
    cfg: &BleuConfig,
) -> Result<f64>
where
    T: Eq + Hash,
    R: AsRef<[T]>,
{
    if hypothesis.is_empty() {
        return Err(MetricError::EmptyHypothesis);
    }
    Ok(BleuStats::for_sentence(references, hypothesis, cfg.max_n).score(cfg))
}

/// Corpus BLEU: clipped counts and lengths are summed over all sentences
/// before the geometric mean and brevity penalty are taken.
pub fn corpus_bleu<T, R, H>(
    references: &[Vec<R>],
    hypotheses: &[H],
    cfg: &BleuConfig,
) -> Result<f64>
where
    T: Eq + Hash,
    R: AsRef<[T]>,
    H: AsRef<[T]>,
{
    if references.len() != hypotheses.len() {
        return Err(MetricError::LengthMismatch {
            references: references.len(),
            hypotheses: hypotheses.len(),
        });
    }
    if let Some(idx) = references.iter().position(Vec::is_empty) {
        return Err(MetricError::EmptyReferenceSet(idx));
    }
    let mut stats = BleuStats::zero(cfg.max_n);
    for (refs, hyp) in references.iter().zip(hypotheses) {
        stats.merge(&BleuStats::for_sentence(refs, hyp.as_ref(), cfg.max_n));
    }
    Ok(stats.score(cfg))
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: Eq>(a: &[T], b: &[T]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut prev = vec![0usize; short.len() + 1];
    let mut curr = vec![0usize; short.len() + 1];
    for x in long {
        for (j, y) in short.iter().enumerate() {
            curr[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[short.len()]
}

/// ROUGE-L F1 from the token LCS.
pub fn rouge_l_f1<T: Eq>(reference: &[T], hypothesis: &[T]) -> Result<f64> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    if hypothesis.is_empty() {
        return Err(MetricError::EmptyHypothesis);
    }
    let lcs = lcs_len(reference, hypothesis);
    if lcs == 0 {
        return Ok(0.0);
    }
    let precision = lcs as f64 / hypothesis.len() as f64;
    let recall = lcs as f64 / reference.len() as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}
