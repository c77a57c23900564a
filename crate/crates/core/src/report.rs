//! Per-pair and corpus-level metric reports.
//!
//! Diversity and semantics are measured against the source (PINC,
//! self-BLEU, BERTScore, BERT-iBLEU); quality against the references
//! (sentence BLEU, ROUGE-L, corpus BLEU). Quality fields are absent for
//! pairs without references and embedding fields are absent without a
//! store.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, SentencePair};
use crate::embed::{
    bert_ibleu, bert_score, candidate_key, source_key, BertIBleuConfig, EmbeddingStore,
};
use crate::filter::FilterError;
use crate::ngram::{
    rouge_l_f1, sentence_bleu, sentence_bleu_multi, BleuConfig, BleuStats, PincConfig,
};
use crate::textnorm::{tokenize, TokenSeq};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReportConfig {
    pub pinc: PincConfig,
    pub bleu: BleuConfig,
    pub bert_ibleu: BertIBleuConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub id: String,
    pub pinc: f64,
    pub self_bleu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bleu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rouge_l_f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bertscore_f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bert_ibleu: Option<f64>,
}

struct PairScores {
    report: MetricReport,
    bleu_stats: Option<BleuStats>,
}

fn score_one(
    pair: &SentencePair,
    store: Option<&EmbeddingStore>,
    cfg: &ReportConfig,
) -> Result<PairScores, FilterError> {
    let metric_err = |source| FilterError::Metric {
        id: pair.id.clone(),
        source,
    };
    let embed_err = |source| FilterError::Embedding {
        id: pair.id.clone(),
        source,
    };
    let source = tokenize(&pair.source);
    let candidate = tokenize(&pair.candidate);
    let references: Vec<TokenSeq> = pair.references.iter().map(|r| tokenize(r)).collect();

    let pinc = crate::ngram::pinc(&source, &candidate, &cfg.pinc).map_err(metric_err)?;
    let self_bleu = sentence_bleu(&source, &candidate, &cfg.bleu).map_err(metric_err)?;
    let (bleu, rouge_l_f1, bleu_stats) = if references.is_empty() {
        (None, None, None)
    } else {
        let bleu = sentence_bleu_multi(&references, &candidate, &cfg.bleu).map_err(metric_err)?;
        let mut best = 0.0f64;
        for reference in &references {
            best = best.max(rouge_l_f1(reference, &candidate).map_err(metric_err)?);
        }
        let stats = BleuStats::for_sentence(&references, &candidate, cfg.bleu.max_n());
        (Some(bleu), Some(best), Some(stats))
    };
    let (bertscore_f1, bert_ibleu_score) = match store {
        None => (None, None),
        Some(store) => {
            let r = store.require(&source_key(&pair.id)).map_err(embed_err)?;
            let c = store.require(&candidate_key(&pair.id)).map_err(embed_err)?;
            let f1 = bert_score(r, c).map_err(embed_err)?.f1;
            // undefined for non-positive F1
            (Some(f1), bert_ibleu(f1, self_bleu, &cfg.bert_ibleu).ok())
        }
    };
    Ok(PairScores {
        report: MetricReport {
            id: pair.id.clone(),
            pinc,
            self_bleu,
            bleu,
            rouge_l_f1,
            bertscore_f1,
            bert_ibleu: bert_ibleu_score,
        },
        bleu_stats,
    })
}

/// Scores one pair.
pub fn score_pair(
    pair: &SentencePair,
    store: Option<&EmbeddingStore>,
    cfg: &ReportConfig,
) -> Result<MetricReport, FilterError> {
    score_one(pair, store, cfg).map(|s| s.report)
}

/// Arithmetic means over the pairs that have each metric, plus corpus
/// BLEU over the pairs that have references. All values in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub pairs: usize,
    pub pinc: f64,
    pub self_bleu: f64,
    pub corpus_bleu: Option<f64>,
    pub rouge_l_f1: Option<f64>,
    pub bertscore_f1: Option<f64>,
    pub bert_ibleu: Option<f64>,
    /// Pairs whose BERT-iBLEU was undefined (non-positive BERTScore F1).
    pub bert_ibleu_undefined: usize,
}

#[derive(Debug, Clone)]
pub struct CorpusReport {
    pub pairs: Vec<MetricReport>,
    pub summary: CorpusSummary,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn score_corpus(
    corpus: &Corpus,
    store: Option<&EmbeddingStore>,
    cfg: &ReportConfig,
) -> Result<CorpusReport, FilterError> {
    let results: Vec<Result<PairScores, FilterError>> = corpus
        .pairs()
        .par_iter()
        .map(|p| score_one(p, store, cfg))
        .collect();
    let mut scored = Vec::with_capacity(results.len());
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(s) => scored.push(s),
            Err(e) => errors.push(e),
        }
    }
    if !errors.is_empty() {
        return Err(FilterError::Pairs(errors));
    }
    let mut bleu_total: Option<BleuStats> = None;
    for stats in scored.iter().filter_map(|s| s.bleu_stats.as_ref()) {
        bleu_total
            .get_or_insert_with(|| BleuStats::zero(cfg.bleu.max_n()))
            .merge(stats);
    }
    let reports: Vec<MetricReport> = scored.into_iter().map(|s| s.report).collect();
    let summary = CorpusSummary {
        pairs: reports.len(),
        pinc: mean(reports.iter().map(|r| r.pinc)).unwrap_or(0.0),
        self_bleu: mean(reports.iter().map(|r| r.self_bleu)).unwrap_or(0.0),
        corpus_bleu: bleu_total.map(|s| s.score(&cfg.bleu)),
        rouge_l_f1: mean(reports.iter().filter_map(|r| r.rouge_l_f1)),
        bertscore_f1: mean(reports.iter().filter_map(|r| r.bertscore_f1)),
        bert_ibleu: mean(reports.iter().filter_map(|r| r.bert_ibleu)),
        bert_ibleu_undefined: reports
            .iter()
            .filter(|r| r.bertscore_f1.is_some() && r.bert_ibleu.is_none())
            .count(),
    };
    Ok(CorpusReport {
        pairs: reports,
        summary,
    })
}
