//! Candidate selection over back-translation groups and the four-stage
//! paraphrase filter (PINC, BERTScore band, n-gram repetition, terminal
//! punctuation).
//!
//! Every stage is a stateless per-pair predicate. All four are always
//! evaluated so their scores can be reported; the first failing stage in
//! the fixed order is the one attributed.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, SentencePair};
use crate::embed::{bert_score, candidate_key, source_key, EmbedError, EmbeddingStore};
use crate::ngram::{has_ngram_repeat, pinc, MetricError, PincConfig};
use crate::textnorm::{has_terminal_punctuation, tokenize};

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("invalid filter configuration: {0}")]
    InvalidConfig(String),
    #[error("BERTScore filtering is enabled but no embedding store was given")]
    MissingStore,
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
    #[error("{} pairs failed to score; first: {}", .0.len(), .0[0])]
    Pairs(Vec<FilterError>),
}

pub type Result<T> = std::result::Result<T, FilterError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateSelectionConfig {
    similarity_threshold: f64,
}

impl CandidateSelectionConfig {
    pub fn new(similarity_threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&similarity_threshold) {
            return Err(FilterError::InvalidConfig(format!(
                "similarity threshold must be in [0, 1], got {similarity_threshold}"
            )));
        }
        Ok(Self {
            similarity_threshold,
        })
    }

    pub fn similarity_threshold(&self) -> f64 {
        self.similarity_threshold
    }
}

impl Default for CandidateSelectionConfig {
    fn default() -> Self {
        Self {
            similarity_threshold: 0.7,
        }
    }
}

/// One back-translated candidate with its two sentence similarities:
/// source vs. back-translation, and source vs. pivot translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackTranslation {
    pub text: String,
    pub sim_src_back: f64,
    pub sim_src_pivot: f64,
}

/// A source sentence and its back-translation candidates, one JSON object
/// per line on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateGroup {
    pub id: String,
    pub source: String,
    pub candidates: Vec<BackTranslation>,
}

/// Keeps candidates whose two similarities are both strictly above the
/// threshold. Kept pair ids are `{group id}-{candidate index}`.
pub fn select_candidates(
    group: &CandidateGroup,
    cfg: &CandidateSelectionConfig,
) -> Vec<SentencePair> {
    let t = cfg.similarity_threshold;
    group
        .candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.sim_src_back > t && c.sim_src_pivot > t)
        .map(|(k, c)| {
            let mut pair = SentencePair::new(
                format!("{}-{k}", group.id),
                group.source.clone(),
                c.text.clone(),
            );
            pair.meta
                .insert("sim_src_back".into(), c.sim_src_back.to_string());
            pair.meta
                .insert("sim_src_pivot".into(), c.sim_src_pivot.to_string());
            pair
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Pinc,
    Bertscore,
    Repetition,
    Punctuation,
}

impl Stage {
    pub const ALL: [Stage; 4] = [
        Stage::Pinc,
        Stage::Bertscore,
        Stage::Repetition,
        Stage::Punctuation,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Pinc => "pinc",
            Stage::Bertscore => "bertscore",
            Stage::Repetition => "repetition",
            Stage::Punctuation => "punctuation",
        }
    }

    /// Display name used in stats tables.
    pub fn title(&self) -> &'static str {
        match self {
            Stage::Pinc => "PINC",
            Stage::Bertscore => "BERTScore",
            Stage::Repetition => "N-gram repetition",
            Stage::Punctuation => "Punctuation",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Thresholds for the four filters. Defaults are the adopted main-pipeline
/// values; [`FilterConfig::augmentation`] is the re-filter preset for
/// mask-filled pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    /// Minimum PINC, inclusive.
    pub pinc_min: f64,
    /// Lower edge of the BERTScore F1 band, inclusive.
    pub bert_min: f64,
    /// Upper edge of the BERTScore F1 band, inclusive.
    pub bert_max: f64,
    /// Window length for the repetition test.
    pub repeat_n: usize,
    pub require_terminal_punct: bool,
    /// When false the BERTScore stage passes every pair and no store is
    /// needed.
    pub bertscore_enabled: bool,
    pub pinc: PincConfig,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            pinc_min: 0.76,
            bert_min: 0.92,
            bert_max: 0.98,
            repeat_n: 2,
            require_terminal_punct: true,
            bertscore_enabled: true,
            pinc: PincConfig::default(),
        }
    }
}

impl FilterConfig {
    pub fn augmentation() -> Self {
        Self {
            pinc_min: 0.7,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pinc_min) {
            return Err(FilterError::InvalidConfig(format!(
                "pinc_min must be in [0, 1], got {}",
                self.pinc_min
            )));
        }
        if !(0.0 <= self.bert_min && self.bert_min < self.bert_max && self.bert_max <= 1.0) {
            return Err(FilterError::InvalidConfig(format!(
                "BERTScore band must satisfy 0 <= min < max <= 1, got [{}, {}]",
                self.bert_min, self.bert_max
            )));
        }
        if self.repeat_n == 0 {
            return Err(FilterError::InvalidConfig("repeat_n must be >= 1".into()));
        }
        Ok(())
    }

    fn stage_passes(&self, stage: Stage, scores: &StageScores) -> bool {
        match stage {
            Stage::Pinc => scores.pinc >= self.pinc_min,
            Stage::Bertscore => scores
                .bertscore_f1
                .is_none_or(|f1| self.bert_min <= f1 && f1 <= self.bert_max),
            Stage::Repetition => !scores.has_repeat,
            Stage::Punctuation => !self.require_terminal_punct || scores.terminal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct StageScores {
    pinc: f64,
    bertscore_f1: Option<f64>,
    has_repeat: bool,
    terminal: bool,
}

/// Per-pair filter result. Serializes to the outcome JSON-lines record
/// `{"id", "passed", "failed_stage", "pinc", "bertscore_f1"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub id: String,
    pub passed: bool,
    pub failed_stage: Option<Stage>,
    pub pinc: f64,
    pub bertscore_f1: Option<f64>,
    /// Every failing stage, in pipeline order.
    #[serde(skip)]
    pub failed_stages: Vec<Stage>,
    #[serde(skip)]
    pub has_repeat: bool,
    #[serde(skip)]
    pub has_terminal_punct: bool,
}

impl FilterOutcome {
    pub fn failed(&self, stage: Stage) -> bool {
        self.failed_stages.contains(&stage)
    }
}

/// Scores one pair through all four stages. BERTScore treats the source
/// as the reference and the candidate as the hypothesis, reading the
/// matrices stored under `{id}:src` and `{id}:cand`.
pub fn run_filters(
    pair: &SentencePair,
    store: Option<&EmbeddingStore>,
    cfg: &FilterConfig,
) -> Result<FilterOutcome> {
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
    let pinc_score = pinc(&source, &candidate, &cfg.pinc).map_err(metric_err)?;
    let bertscore_f1 = if cfg.bertscore_enabled {
        let store = store.ok_or(FilterError::MissingStore)?;
        let reference = store.require(&source_key(&pair.id)).map_err(embed_err)?;
        let hypothesis = store.require(&candidate_key(&pair.id)).map_err(embed_err)?;
        Some(bert_score(reference, hypothesis).map_err(embed_err)?.f1)
    } else {
        None
    };
    let scores = StageScores {
        pinc: pinc_score,
        bertscore_f1,
        has_repeat: has_ngram_repeat(&candidate, cfg.repeat_n),
        terminal: has_terminal_punctuation(&pair.candidate),
    };
    let failed_stages: Vec<Stage> = Stage::ALL
        .into_iter()
        .filter(|&stage| !cfg.stage_passes(stage, &scores))
        .collect();
    Ok(FilterOutcome {
        id: pair.id.clone(),
        passed: failed_stages.is_empty(),
        failed_stage: failed_stages.first().copied(),
        pinc: scores.pinc,
        bertscore_f1: scores.bertscore_f1,
        failed_stages,
        has_repeat: scores.has_repeat,
        has_terminal_punct: scores.terminal,
    })
}

/// Rejections attributed to each stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct StageCounts {
    pub pinc: usize,
    pub bertscore: usize,
    pub repetition: usize,
    pub punctuation: usize,
}

impl StageCounts {
    pub fn get(&self, stage: Stage) -> usize {
        match stage {
            Stage::Pinc => self.pinc,
            Stage::Bertscore => self.bertscore,
            Stage::Repetition => self.repetition,
            Stage::Punctuation => self.punctuation,
        }
    }

    fn bump(&mut self, stage: Stage) {
        match stage {
            Stage::Pinc => self.pinc += 1,
            Stage::Bertscore => self.bertscore += 1,
            Stage::Repetition => self.repetition += 1,
            Stage::Punctuation => self.punctuation += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.pinc + self.bertscore + self.repetition + self.punctuation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct PipelineStats {
    pub input: usize,
    pub passed: usize,
    pub rejected: StageCounts,
}

impl PipelineStats {
    pub fn from_outcomes<'a>(outcomes: impl IntoIterator<Item = &'a FilterOutcome>) -> Self {
        let mut stats = Self::default();
        for outcome in outcomes {
            stats.input += 1;
            match outcome.failed_stage {
                None => stats.passed += 1,
                Some(stage) => stats.rejected.bump(stage),
            }
        }
        stats
    }

    pub fn merge(&mut self, other: &PipelineStats) {
        self.input += other.input;
        self.passed += other.passed;
        self.rejected.pinc += other.rejected.pinc;
        self.rejected.bertscore += other.rejected.bertscore;
        self.rejected.repetition += other.rejected.repetition;
        self.rejected.punctuation += other.rejected.punctuation;
    }

    /// Passed over input; 0 for an empty input.
    pub fn yield_fraction(&self) -> f64 {
        if self.input == 0 {
            0.0
        } else {
            self.passed as f64 / self.input as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct FilterRun {
    pub corpus: Corpus,
    pub stats: PipelineStats,
    pub outcomes: Vec<FilterOutcome>,
}

/// Runs [`run_filters`] over every pair (in parallel on the current rayon
/// pool) and keeps the passing pairs in input order. Scoring errors are
/// collected for all pairs before returning.
pub fn filter_corpus(
    corpus: &Corpus,
    store: Option<&EmbeddingStore>,
    cfg: &FilterConfig,
) -> Result<FilterRun> {
    cfg.validate()?;
    if cfg.bertscore_enabled && store.is_none() {
        return Err(FilterError::MissingStore);
    }
    let results: Vec<Result<FilterOutcome>> = corpus
        .pairs()
        .par_iter()
        .map(|pair| run_filters(pair, store, cfg))
        .collect();
    let mut outcomes = Vec::with_capacity(results.len());
    let mut errors = Vec::new();
    for result in results {
        match result {
            Ok(outcome) => outcomes.push(outcome),
            Err(e) => errors.push(e),
        }
    }
    if !errors.is_empty() {
        return Err(FilterError::Pairs(errors));
    }
    let kept = corpus
        .iter()
        .zip(&outcomes)
        .filter(|(_, o)| o.passed)
        .map(|(p, _)| p.clone())
        .collect();
    let stats = PipelineStats::from_outcomes(&outcomes);
    Ok(FilterRun {
        corpus: Corpus::new(kept).expect("subset of a valid corpus is valid"),
        stats,
        outcomes,
    })
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Stage::ALL
            .into_iter()
            .find(|stage| stage.name() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{mock_embed, MockMode, TokenEmbeddingMatrix};

    fn group(sims: &[(f64, f64)]) -> CandidateGroup {
        CandidateGroup {
            id: "g".into(),
            source: "উৎস বাক্য।".into(),
            candidates: sims
                .iter()
                .enumerate()
                .map(|(i, &(b, p))| BackTranslation {
                    text: format!("প্রার্থী {i}।"),
                    sim_src_back: b,
                    sim_src_pivot: p,
                })
                .collect(),
        }
    }

    #[test]
    fn selection_is_strict() {
        let cfg = CandidateSelectionConfig::default();
        assert_eq!(select_candidates(&group(&[(0.9, 0.9)]), &cfg).len(), 1);
        assert!(select_candidates(&group(&[(0.9, 0.7)]), &cfg).is_empty());
        assert!(select_candidates(&group(&[(0.7, 0.9)]), &cfg).is_empty());
        let kept = select_candidates(&group(&[(0.5, 0.9), (0.71, 0.8)]), &cfg);
        assert_eq!(kept[0].id, "g-1");
        assert_eq!(kept[0].meta["sim_src_back"], "0.71");
        assert!(CandidateSelectionConfig::new(1.5).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(FilterConfig::default().validate().is_ok());
        let bad = |f: fn(&mut FilterConfig)| {
            let mut cfg = FilterConfig::default();
            f(&mut cfg);
            cfg.validate().is_err()
        };
        assert!(bad(|c| c.pinc_min = 1.1));
        assert!(bad(|c| c.bert_min = 0.98));
        assert!(bad(|c| c.bert_max = 1.01));
        assert!(bad(|c| c.repeat_n = 0));
        assert_eq!(FilterConfig::augmentation().pinc_min, 0.7);
        assert_eq!(FilterConfig::augmentation().bert_min, 0.92);
        assert_eq!(FilterConfig::augmentation().bert_max, 0.98);
    }

    fn single_row_store(id: &str, f1: f64) -> EmbeddingStore {
        let mut store = EmbeddingStore::new(2, "t").unwrap();
        let s = (1.0 - f1 * f1).sqrt();
        store
            .insert(TokenEmbeddingMatrix::new(source_key(id), 2, vec![1.0, 0.0]).unwrap())
            .unwrap();
        store
            .insert(
                TokenEmbeddingMatrix::new(candidate_key(id), 2, vec![f1 as f32, s as f32]).unwrap(),
            )
            .unwrap();
        store
    }

    #[test]
    fn all_pass_and_pinc_failure() {
        let store = single_row_store("p", 0.95);
        let pair = SentencePair::new("p", "আমি ভাত খাই।", "তুমি রুটি খাও।");
        let out = run_filters(&pair, Some(&store), &FilterConfig::default()).unwrap();
        assert!(out.passed, "{out:?}");
        assert_eq!(out.failed_stage, None);
        assert!(out.pinc >= 0.76);

        let copy = SentencePair::new("p", "আমি ভাত খাই।", "আমি ভাত খাই।");
        let out = run_filters(&copy, Some(&store), &FilterConfig::default()).unwrap();
        assert_eq!(out.failed_stage, Some(Stage::Pinc));
        assert_eq!(out.pinc, 0.0);
    }

    #[test]
    fn near_copy_fails_upper_band() {
        let words: Vec<String> = (0..60).map(|i| format!("শব্দ{i}")).collect();
        let source = format!("{}।", words.join(" "));
        let mut changed = words.clone();
        changed[30] = "নতুন".into();
        let candidate = format!("{}।", changed.join(" "));
        let mut store = EmbeddingStore::new(64, "mock").unwrap();
        store
            .insert(mock_embed(source_key("n"), &source, 64, MockMode::Tokens).unwrap())
            .unwrap();
        store
            .insert(mock_embed(candidate_key("n"), &candidate, 64, MockMode::Tokens).unwrap())
            .unwrap();
        let cfg = FilterConfig {
            pinc_min: 0.0,
            ..FilterConfig::default()
        };
        let out = run_filters(
            &SentencePair::new("n", source, candidate),
            Some(&store),
            &cfg,
        )
        .unwrap();
        assert!(out.bertscore_f1.unwrap() > 0.98);
        assert_eq!(out.failed_stage, Some(Stage::Bertscore));
    }

    #[test]
    fn later_stages_still_scored() {
        let store = single_row_store("p", 0.5);
        let pair = SentencePair::new("p", "ক খ গ।", "ক খ গ");
        let out = run_filters(&pair, Some(&store), &FilterConfig::default()).unwrap();
        assert_eq!(
            out.failed_stages,
            [Stage::Pinc, Stage::Bertscore, Stage::Punctuation]
        );
        assert_eq!(out.failed_stage, Some(Stage::Pinc));
    }

    #[test]
    fn missing_embeddings() {
        let pair = SentencePair::new("q", "ক খ।", "গ ঘ।");
        assert!(matches!(
            run_filters(&pair, None, &FilterConfig::default()),
            Err(FilterError::MissingStore)
        ));
        let store = single_row_store("p", 0.95);
        assert!(matches!(
            run_filters(&pair, Some(&store), &FilterConfig::default()),
            Err(FilterError::Embedding { .. })
        ));
        let cfg = FilterConfig {
            bertscore_enabled: false,
            ..FilterConfig::default()
        };
        assert!(run_filters(&pair, None, &cfg).unwrap().passed);
    }

    #[test]
    fn corpus_errors_are_aggregated() {
        let corpus = Corpus::new(vec![
            SentencePair::new("a", "ক খ।", "গ ঘ।"),
            SentencePair::new("b", "ক খ।", "গ ঘ।"),
        ])
        .unwrap();
        let store = EmbeddingStore::new(2, "empty").unwrap();
        match filter_corpus(&corpus, Some(&store), &FilterConfig::default()) {
            Err(FilterError::Pairs(errors)) => assert_eq!(errors.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn outcome_json_shape() {
        let store = single_row_store("p", 0.95);
        let pair = SentencePair::new("p", "ক খ গ।", "ক খ গ।");
        let out = run_filters(&pair, Some(&store), &FilterConfig::default()).unwrap();
        let json: serde_json::Value = serde_json::to_value(&out).unwrap();
        let keys: Vec<_> = json.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 5);
        assert_eq!(json["failed_stage"], "pinc");
        assert_eq!(json["passed"], false);
        assert!((json["bertscore_f1"].as_f64().unwrap() - 0.95).abs() < 1e-6);
    }
}
