//! Yield curves and score histograms for choosing filter thresholds.
//!
//! A yield curve reports, for each threshold, the fraction of pairs whose
//! score is at least that threshold. Both outputs are emitted as CSV for
//! external plotting.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::Corpus;
use crate::embed::{
    bert_score, candidate_key, sentence_similarity, source_key, EmbedError, EmbeddingStore,
};
use crate::ngram::{pinc, MetricError, PincConfig};
use crate::textnorm::tokenize;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("no scores to sweep")]
    EmptyScores,
    #[error("thresholds must be finite and strictly ascending")]
    UnsortedThresholds,
    #[error("histogram needs at least two finite, strictly ascending edges")]
    BadEdges,
    #[error("score {score} lies outside [{low}, {high}]")]
    OutOfRange { score: f64, low: f64, high: f64 },
    #[error("score is NaN")]
    NanScore,
    #[error("histogram edges differ")]
    EdgeMismatch,
    #[error("metric {0} needs an embedding store")]
    MissingStore(SweepMetric),
    #[error("pair {id:?}: {source}")]
    Metric {
        id: String,
        #[source]
        source: MetricError,
    },
    #[error("pair {id:?}: {source}")]
    Embedding {
        id: String,
        #[source]
        source: EmbedError,
    },
}

pub type Result<T> = std::result::Result<T, SweepError>;

fn strictly_ascending(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite()) && values.windows(2).all(|w| w[0] < w[1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub metric: String,
    pub total: usize,
    pub thresholds: Vec<f64>,
    pub yields: Vec<f64>,
    pub counts: Vec<usize>,
}

impl SweepCurve {
    /// `threshold,count,fraction` with six decimals, LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,count,fraction\n");
        for ((t, c), y) in self.thresholds.iter().zip(&self.counts).zip(&self.yields) {
            writeln!(out, "{t:.6},{c},{y:.6}").expect("writing to a String");
        }
        out
    }
}

/// Fraction of `scores` at or above each threshold.
pub fn yield_curve(metric: &str, scores: &[f64], thresholds: &[f64]) -> Result<SweepCurve> {
    if scores.is_empty() {
        return Err(SweepError::EmptyScores);
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(SweepError::NanScore);
    }
    if !strictly_ascending(thresholds) {
        return Err(SweepError::UnsortedThresholds);
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let counts: Vec<usize> = thresholds
        .iter()
        .map(|&t| n - sorted.partition_point(|&s| s < t))
        .collect();
    Ok(SweepCurve {
        metric: metric.to_string(),
        total: n,
        thresholds: thresholds.to_vec(),
        yields: counts.iter().map(|&c| c as f64 / n as f64).collect(),
        counts,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreHistogram {
    pub metric: String,
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl ScoreHistogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Adds the counts of a histogram over identical edges.
    pub fn merge(&mut self, other: &ScoreHistogram) -> Result<()> {
        if self.edges != other.edges {
            return Err(SweepError::EdgeMismatch);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// `lower,upper,count,fraction` with six decimals, LF line endings.
    pub fn to_csv(&self) -> String {
        let total = self.total();
        let mut out = String::from("lower,upper,count,fraction\n");
        for (bin, count) in self.counts.iter().enumerate() {
            let fraction = if total == 0 {
                0.0
            } else {
                *count as f64 / total as f64
            };
            writeln!(
                out,
                "{:.6},{:.6},{count},{fraction:.6}",
                self.edges[bin],
                self.edges[bin + 1]
            )
            .expect("writing to a String");
        }
        out
    }
}

/// Bins `[e_i, e_{i+1})`; the last bin also holds scores equal to the top
/// edge.
pub fn histogram(metric: &str, scores: &[f64], edges: &[f64]) -> Result<ScoreHistogram> {
    if edges.len() < 2 || !strictly_ascending(edges) {
        return Err(SweepError::BadEdges);
    }
    let (low, high) = (edges[0], edges[edges.len() - 1]);
    let last = edges.len() - 2;
    let mut counts = vec![0usize; edges.len() - 1];
    for &score in scores {
        if score.is_nan() {
            return Err(SweepError::NanScore);
        }
        if score < low || score > high {
            return Err(SweepError::OutOfRange { score, low, high });
        }
        let bin = (edges.partition_point(|&e| e <= score) - 1).min(last);
        counts[bin] += 1;
    }
    Ok(ScoreHistogram {
        metric: metric.to_string(),
        edges: edges.to_vec(),
        counts,
    })
}

/// `n + 1` evenly spaced edges over `[low, high]`.
pub fn uniform_edges(low: f64, high: f64, bins: usize) -> Result<Vec<f64>> {
    if bins == 0 || !low.is_finite() || !high.is_finite() || low >= high {
        return Err(SweepError::BadEdges);
    }
    let width = (high - low) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| low + width * i as f64).collect();
    edges.push(high);
    Ok(edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMetric {
    Pinc,
    BertscoreF1,
    SentenceSimilarity,
}

impl SweepMetric {
    pub fn name(&self) -> &'static str {
        match self {
            SweepMetric::Pinc => "pinc",
            SweepMetric::BertscoreF1 => "bertscore_f1",
            SweepMetric::SentenceSimilarity => "sentence_similarity",
        }
    }

    pub fn needs_store(&self) -> bool {
        !matches!(self, SweepMetric::Pinc)
    }
}

impl std::fmt::Display for SweepMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepMetric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pinc" => Ok(Self::Pinc),
            "bertscore_f1" | "bertscore" => Ok(Self::BertscoreF1),
            "sentence_similarity" | "similarity" => Ok(Self::SentenceSimilarity),
            other => Err(format!(
                "unknown metric {other:?} (expected pinc, bertscore_f1 or sentence_similarity)"
            )),
        }
    }
}

/// Scores every pair once, in corpus order.
pub fn score_corpus(
    corpus: &Corpus,
    store: Option<&EmbeddingStore>,
    metric: SweepMetric,
    pinc_cfg: &PincConfig,
) -> Result<Vec<f64>> {
    if metric.needs_store() && store.is_none() {
        return Err(SweepError::MissingStore(metric));
    }
    corpus
        .pairs()
        .par_iter()
        .map(|pair| {
            let embed_err = |source| SweepError::Embedding {
                id: pair.id.clone(),
                source,
            };
            match metric {
                SweepMetric::Pinc => pinc(
                    &tokenize(&pair.source),
                    &tokenize(&pair.candidate),
                    pinc_cfg,
                )
                .map_err(|source| SweepError::Metric {
                    id: pair.id.clone(),
                    source,
                }),
                SweepMetric::BertscoreF1 => {
                    let store = store.expect("checked above");
                    let r = store.require(&source_key(&pair.id)).map_err(embed_err)?;
                    let c = store.require(&candidate_key(&pair.id)).map_err(embed_err)?;
                    Ok(bert_score(r, c).map_err(embed_err)?.f1)
                }
                SweepMetric::SentenceSimilarity => {
                    let store = store.expect("checked above");
                    sentence_similarity(store, &source_key(&pair.id), &candidate_key(&pair.id))
                        .map_err(embed_err)
                }
            }
        })
        .collect()
}

pub fn sweep_report(
    corpus: &Corpus,
    store: Option<&EmbeddingStore>,
    metric: SweepMetric,
    thresholds: &[f64],
) -> Result<SweepCurve> {
    let scores = score_corpus(corpus, store, metric, &PincConfig::default())?;
    yield_curve(metric.name(), &scores, thresholds)
}
