//! POS-driven masked-LM augmentation: plans one-mask-at-a-time requests
//! over a tagged source sentence, merges externally produced fills back
//! into a new candidate, and re-filters the augmented pairs.
//!
//! Tokens are masked in order of their tag's position in `pos_order`,
//! ties broken left to right. Mask filling itself happens outside this
//! crate; requests and fills travel as JSON-lines.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, SentencePair};
use crate::embed::EmbeddingStore;
use crate::filter::{filter_corpus, FilterConfig, FilterError, FilterRun};
use crate::textnorm::detokenize;

/// Wire-format mask sentinel.
pub const MASK_TOKEN: &str = "[MASK]";

/// Main verb, auxiliary verb, adjective, verbal noun, adverb of manner,
/// adverb of location, spatio-temporal noun.
pub const DEFAULT_POS_ORDER: [&str; 7] = ["VM", "VA", "JJ", "NV", "AMN", "ALC", "NST"];

/// Suffix appended to the id of an augmented pair.
pub const AUGMENTED_SUFFIX: &str = "-aug";

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("sentence {id:?}: {tokens} tokens but {tags} tags")]
    LengthMismatch {
        id: String,
        tokens: usize,
        tags: usize,
    },
    #[error("sentence {id:?}: {reason}")]
    InvalidSentence { id: String, reason: String },
    #[error("invalid augmentation config: {0}")]
    InvalidConfig(String),
    #[error("plan {plan:?} has no step {step}")]
    UnknownStep { plan: String, step: usize },
    #[error("plan {plan:?}: step {step} filled more than once")]
    DuplicateStep { plan: String, step: usize },
    #[error("plan {plan:?}: step {step} has no fill")]
    MissingStep { plan: String, step: usize },
    #[error("fill for plan {found:?} given to plan {expected:?}")]
    PlanMismatch { expected: String, found: String },
    #[error("plan {plan:?} step {step}: fill {token:?} is empty or contains whitespace")]
    BadFill {
        plan: String,
        step: usize,
        token: String,
    },
    #[error(transparent)]
    Filter(#[from] FilterError),
}

pub type Result<T> = std::result::Result<T, AugmentError>;

/// A tokenized sentence with one POS tag per token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedSentence {
    pub id: String,
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
}

impl TaggedSentence {
    pub fn validate(&self) -> Result<()> {
        if self.tokens.len() != self.tags.len() {
            return Err(AugmentError::LengthMismatch {
                id: self.id.clone(),
                tokens: self.tokens.len(),
                tags: self.tags.len(),
            });
        }
        let invalid = |reason: &str| AugmentError::InvalidSentence {
            id: self.id.clone(),
            reason: reason.into(),
        };
        if self.id.is_empty() {
            return Err(invalid("empty id"));
        }
        if self
            .tokens
            .iter()
            .any(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(invalid("token is empty or contains whitespace"));
        }
        if self.tags.iter().any(String::is_empty) {
            return Err(invalid("empty tag"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    pos_order: Vec<String>,
    pub refilter: FilterConfig,
}

impl AugmentConfig {
    pub fn new(pos_order: Vec<String>, refilter: FilterConfig) -> Result<Self> {
        if pos_order.is_empty() {
            return Err(AugmentError::InvalidConfig("POS order is empty".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = pos_order.iter().find(|t| !seen.insert(t.as_str())) {
            return Err(AugmentError::InvalidConfig(format!(
                "POS tag {dup:?} listed twice"
            )));
        }
        refilter.validate()?;
        Ok(Self {
            pos_order,
            refilter,
        })
    }

    pub fn pos_order(&self) -> &[String] {
        &self.pos_order
    }
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            pos_order: DEFAULT_POS_ORDER.iter().map(|s| s.to_string()).collect(),
            refilter: FilterConfig::augmentation(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskStep {
    pub position: usize,
    pub tag: String,
}

/// The ordered masking steps for one sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskPlan {
    pub plan_id: String,
    pub tokens: Vec<String>,
    pub steps: Vec<MaskStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskRequest {
    pub plan_id: String,
    pub step: usize,
    pub tokens: Vec<String>,
    pub mask_position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskFill {
    pub plan_id: String,
    pub step: usize,
    pub token: String,
}

/// One step per token whose tag appears in `pos_order`, sorted by
/// (tag rank, position).
pub fn plan_masks(sentence: &TaggedSentence, cfg: &AugmentConfig) -> Result<MaskPlan> {
    sentence.validate()?;
    let rank: HashMap<&str, usize> = cfg
        .pos_order
        .iter()
        .enumerate()
        .map(|(i, tag)| (tag.as_str(), i))
        .collect();
    let mut keyed: Vec<(usize, usize)> = sentence
        .tags
        .iter()
        .enumerate()
        .filter_map(|(pos, tag)| rank.get(tag.as_str()).map(|&r| (r, pos)))
        .collect();
    keyed.sort_unstable();
    Ok(MaskPlan {
        plan_id: sentence.id.clone(),
        tokens: sentence.tokens.clone(),
        steps: keyed
            .into_iter()
            .map(|(_, position)| MaskStep {
                position,
                tag: sentence.tags[position].clone(),
            })
            .collect(),
    })
}

impl MaskPlan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Indexes fills by step, rejecting foreign plans, unknown or repeated
    /// steps and malformed tokens.
    fn index_fills<'a>(&self, fills: &'a [MaskFill]) -> Result<HashMap<usize, &'a str>> {
        let mut by_step = HashMap::with_capacity(fills.len());
        for fill in fills {
            if fill.plan_id != self.plan_id {
                return Err(AugmentError::PlanMismatch {
                    expected: self.plan_id.clone(),
                    found: fill.plan_id.clone(),
                });
            }
            if fill.step >= self.steps.len() {
                return Err(AugmentError::UnknownStep {
                    plan: self.plan_id.clone(),
                    step: fill.step,
                });
            }
            if fill.token.is_empty() || fill.token.chars().any(char::is_whitespace) {
                return Err(AugmentError::BadFill {
                    plan: self.plan_id.clone(),
                    step: fill.step,
                    token: fill.token.clone(),
                });
            }
            if by_step.insert(fill.step, fill.token.as_str()).is_some() {
                return Err(AugmentError::DuplicateStep {
                    plan: self.plan_id.clone(),
                    step: fill.step,
                });
            }
        }
        Ok(by_step)
    }

    /// The request for `step`: earlier steps carry their fill from
    /// `prior_fills` when one is given (the original token otherwise), and
    /// the step's own position carries [`MASK_TOKEN`]. Fills for `step` or
    /// later are ignored.
    pub fn request(&self, step: usize, prior_fills: &[MaskFill]) -> Result<MaskRequest> {
        let current = self
            .steps
            .get(step)
            .ok_or_else(|| AugmentError::UnknownStep {
                plan: self.plan_id.clone(),
                step,
            })?;
        let fills = self.index_fills(prior_fills)?;
        let mut tokens = self.tokens.clone();
        for (k, earlier) in self.steps[..step].iter().enumerate() {
            if let Some(token) = fills.get(&k) {
                tokens[earlier.position] = token.to_string();
            }
        }
        tokens[current.position] = MASK_TOKEN.to_string();
        Ok(MaskRequest {
            plan_id: self.plan_id.clone(),
            step,
            tokens,
            mask_position: current.position,
        })
    }

    /// Requests for every step before any fill is known.
    pub fn requests(&self) -> Vec<MaskRequest> {
        (0..self.steps.len())
            .map(|step| self.request(step, &[]).expect("step index in range"))
            .collect()
    }

    /// Token list with every step replaced by its fill.
    pub fn apply(&self, fills: &[MaskFill]) -> Result<Vec<String>> {
        let by_step = self.index_fills(fills)?;
        let mut tokens = self.tokens.clone();
        for (k, step) in self.steps.iter().enumerate() {
            let token = by_step.get(&k).ok_or_else(|| AugmentError::MissingStep {
                plan: self.plan_id.clone(),
                step: k,
            })?;
            tokens[step.position] = token.to_string();
        }
        Ok(tokens)
    }
}

/// Builds the augmented pair: the original source with the fully filled,
/// detokenized sentence as candidate and `-aug` appended to the id.
pub fn merge_fills(
    original: &SentencePair,
    plan: &MaskPlan,
    fills: &[MaskFill],
) -> Result<SentencePair> {
    if original.id != plan.plan_id {
        return Err(AugmentError::PlanMismatch {
            expected: original.id.clone(),
            found: plan.plan_id.clone(),
        });
    }
    let tokens = plan.apply(fills)?;
    let mut pair = original.clone();
    pair.id = format!("{}{AUGMENTED_SUFFIX}", original.id);
    pair.candidate = detokenize(&tokens);
    Ok(pair)
}

/// Runs the filter pipeline with the augmentation thresholds.
pub fn filter_augmented(
    pairs: &Corpus,
    store: Option<&EmbeddingStore>,
    cfg: &AugmentConfig,
) -> Result<FilterRun> {
    Ok(filter_corpus(pairs, store, &cfg.refilter)?)
}
