//! Sentence-pair records, corpus files, deterministic splitting and
//! deduplication.
//!
//! JSON-lines is the canonical on-disk format:
//!
//! ```text
//! {"id": "...", "source": "...", "candidate": "...", "references": ["..."], "meta": {"k": "v"}}
//! ```
//!
//! TSV is a lossless export with five columns `id`, `source`, `candidate`,
//! `references`, `meta`. Backslash, tab, newline and carriage return are
//! escaped as `\\`, `\t`, `\n`, `\r`. References are joined with U+001E; meta
//! entries are `key U+001F value` joined with U+001E.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textnorm::normalize;

const RECORD_SEP: char = '\u{1E}';
const UNIT_SEP: char = '\u{1F}';

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("duplicate id {id:?}")]
    DuplicateId { id: String },
    #[error("invalid pair {id:?}: {reason}")]
    InvalidPair { id: String, reason: String },
    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),
    #[error("cannot split an empty corpus")]
    EmptyCorpus,
    #[error("pair {id:?} cannot be written as TSV: {reason}")]
    Unencodable { id: String, reason: String },
}

pub type Result<T> = std::result::Result<T, CorpusError>;

/// A source sentence and a candidate paraphrase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    pub id: String,
    pub source: String,
    pub candidate: String,
    #[serde(default)]
    pub references: Vec<String>,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl SentencePair {
    pub fn new(
        id: impl Into<String>,
        source: impl Into<String>,
        candidate: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            source: source.into(),
            candidate: candidate.into(),
            references: Vec::new(),
            meta: BTreeMap::new(),
        }
    }

    pub fn with_references<I, S>(mut self, references: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.references = references.into_iter().map(Into::into).collect();
        self
    }

    /// Checks the record invariants: non-empty id, and source, candidate
    /// and every reference non-empty after normalization.
    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: &str| CorpusError::InvalidPair {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.id.is_empty() {
            return Err(invalid("empty id"));
        }
        if normalize(&self.source).is_empty() {
            return Err(invalid("empty source"));
        }
        if normalize(&self.candidate).is_empty() {
            return Err(invalid("empty candidate"));
        }
        if self.references.iter().any(|r| normalize(r).is_empty()) {
            return Err(invalid("empty reference"));
        }
        Ok(())
    }
}

/// An ordered collection of pairs with unique ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    pairs: Vec<SentencePair>,
}

impl Corpus {
    /// Validates every pair and rejects duplicate ids.
    pub fn new(pairs: Vec<SentencePair>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(pairs.len());
        for pair in &pairs {
            pair.validate()?;
            if !seen.insert(pair.id.as_str()) {
                return Err(CorpusError::DuplicateId {
                    id: pair.id.clone(),
                });
            }
        }
        Ok(Self { pairs })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn pairs(&self) -> &[SentencePair] {
        &self.pairs
    }

    pub fn into_pairs(self) -> Vec<SentencePair> {
        self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SentencePair> {
        self.pairs.iter()
    }

    pub fn get(&self, id: &str) -> Option<&SentencePair> {
        self.pairs.iter().find(|p| p.id == id)
    }

    fn from_subset(pairs: Vec<SentencePair>) -> Self {
        Self { pairs }
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a SentencePair;
    type IntoIter = std::slice::Iter<'a, SentencePair>;

    fn into_iter(self) -> Self::IntoIter {
        self.pairs.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    #[default]
    JsonLines,
    Tsv,
}

impl CorpusFormat {
    /// `.tsv` selects TSV, anything else JSON-lines.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("tsv") => Self::Tsv,
            _ => Self::JsonLines,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "jsonl" | "json-lines" => Ok(Self::JsonLines),
            "tsv" => Ok(Self::Tsv),
            other => Err(format!(
                "unknown corpus format {other:?} (expected jsonl or tsv)"
            )),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let file = File::open(path).map_err(io_err(path))?;
    read_corpus_from(BufReader::new(file), format).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Reads records in order. Blank lines are skipped; line numbers in errors
/// are 1-based.
pub fn read_corpus_from<R: BufRead>(reader: R, format: CorpusFormat) -> Result<Corpus> {
    let mut pairs = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: PathBuf::new(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let pair = match format {
            CorpusFormat::JsonLines => {
                serde_json::from_str::<SentencePair>(&line).map_err(|e| CorpusError::Malformed {
                    line: line_no,
                    reason: e.to_string(),
                })?
            }
            CorpusFormat::Tsv => {
                parse_tsv_line(&line).map_err(|reason| CorpusError::Malformed {
                    line: line_no,
                    reason,
                })?
            }
        };
        pair.validate().map_err(|e| CorpusError::Malformed {
            line: line_no,
            reason: e.to_string(),
        })?;
        if !seen.insert(pair.id.clone()) {
            return Err(CorpusError::DuplicateId { id: pair.id });
        }
        pairs.push(pair);
    }
    Ok(Corpus { pairs })
}

pub fn write_corpus(corpus: &Corpus, path: &Path, format: CorpusFormat) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut writer = BufWriter::new(file);
    write_corpus_to(corpus, &mut writer, format).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })?;
    writer.flush().map_err(io_err(path))
}

pub fn write_corpus_to<W: Write>(
    corpus: &Corpus,
    writer: &mut W,
    format: CorpusFormat,
) -> Result<()> {
    let io = |source| CorpusError::Io {
        path: PathBuf::new(),
        source,
    };
    for pair in corpus {
        let line = match format {
            CorpusFormat::JsonLines => {
                serde_json::to_string(pair).expect("string-keyed record always serializes")
            }
            CorpusFormat::Tsv => format_tsv_line(pair)?,
        };
        writer.write_all(line.as_bytes()).map_err(io)?;
        writer.write_all(b"\n").map_err(io)?;
    }
    Ok(())
}

fn escape_tsv(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape_tsv(text: &str) -> std::result::Result<String, String> {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => return Err(format!("unknown escape \\{other}")),
            None => return Err("dangling backslash".into()),
        }
    }
    Ok(out)
}

fn format_tsv_line(pair: &SentencePair) -> Result<String> {
    let separators = |text: &str| text.contains([RECORD_SEP, UNIT_SEP]);
    let unencodable = |reason: &str| CorpusError::Unencodable {
        id: pair.id.clone(),
        reason: reason.to_string(),
    };
    if separators(&pair.id) || separators(&pair.source) || separators(&pair.candidate) {
        return Err(unencodable("text contains U+001E or U+001F"));
    }
    if pair.references.iter().any(|r| separators(r)) {
        return Err(unencodable("reference contains U+001E or U+001F"));
    }
    if pair
        .meta
        .iter()
        .any(|(k, v)| separators(k) || separators(v))
    {
        return Err(unencodable("meta contains U+001E or U+001F"));
    }
    if pair.meta.keys().any(String::is_empty) {
        return Err(unencodable("empty meta key"));
    }
    let references = pair
        .references
        .iter()
        .map(|r| escape_tsv(r))
        .collect::<Vec<_>>()
        .join(&RECORD_SEP.to_string());
    let meta = pair
        .meta
        .iter()
        .map(|(k, v)| format!("{}{UNIT_SEP}{}", escape_tsv(k), escape_tsv(v)))
        .collect::<Vec<_>>()
        .join(&RECORD_SEP.to_string());
    Ok(format!(
        "{}\t{}\t{}\t{}\t{}",
        escape_tsv(&pair.id),
        escape_tsv(&pair.source),
        escape_tsv(&pair.candidate),
        references,
        meta
    ))
}

fn parse_tsv_line(line: &str) -> std::result::Result<SentencePair, String> {
    let columns: Vec<&str> = line.split('\t').collect();
    if !(3..=5).contains(&columns.len()) {
        return Err(format!(
            "expected 3 to 5 tab-separated columns, found {}",
            columns.len()
        ));
    }
    let mut pair = SentencePair::new(
        unescape_tsv(columns[0])?,
        unescape_tsv(columns[1])?,
        unescape_tsv(columns[2])?,
    );
    if let Some(refs) = columns.get(3).filter(|c| !c.is_empty()) {
        pair.references = refs
            .split(RECORD_SEP)
            .map(unescape_tsv)
            .collect::<std::result::Result<_, _>>()?;
    }
    if let Some(meta) = columns.get(4).filter(|c| !c.is_empty()) {
        for entry in meta.split(RECORD_SEP) {
            let (k, v) = entry
                .split_once(UNIT_SEP)
                .ok_or_else(|| format!("meta entry {entry:?} lacks a key/value separator"))?;
            pair.meta.insert(unescape_tsv(k)?, unescape_tsv(v)?);
        }
    }
    Ok(pair)
}

/// Train/validation/test proportions held as exact rationals over a common
/// denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitRatios {
    train: u64,
    validation: u64,
    test: u64,
    denominator: u64,
}

impl SplitRatios {
    /// Proportions `train/d`, `validation/d`, `test/d`; the numerators must
    /// sum to `d`.
    pub fn from_parts(train: u64, validation: u64, test: u64, denominator: u64) -> Result<Self> {
        if denominator == 0 {
            return Err(CorpusError::InvalidRatios("zero denominator".into()));
        }
        let sum = train as u128 + validation as u128 + test as u128;
        if sum != denominator as u128 {
            return Err(CorpusError::InvalidRatios(format!(
                "{train}/{denominator} + {validation}/{denominator} + {test}/{denominator} != 1"
            )));
        }
        Ok(Self {
            train,
            validation,
            test,
            denominator,
        })
    }

    pub fn percent(train: u64, validation: u64, test: u64) -> Result<Self> {
        Self::from_parts(train, validation, test, 100)
    }

    pub fn train(&self) -> (u64, u64) {
        (self.train, self.denominator)
    }

    pub fn validation(&self) -> (u64, u64) {
        (self.validation, self.denominator)
    }

    pub fn test(&self) -> (u64, u64) {
        (self.test, self.denominator)
    }

    /// Split sizes `(train, validation, test)` for `n` items. Test and
    /// validation are rounded half-up; train takes the remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let test = round_half_up(self.test, self.denominator, n).min(n);
        let validation = round_half_up(self.validation, self.denominator, n).min(n - test);
        (n - test - validation, validation, test)
    }
}

fn round_half_up(numerator: u64, denominator: u64, n: usize) -> usize {
    let scaled = numerator as u128 * n as u128;
    let d = denominator as u128;
    ((2 * scaled + d) / (2 * d)) as usize
}

impl FromStr for SplitRatios {
    type Err = CorpusError;

    /// Parses `a:b:c` where each part is a non-negative decimal. Parts that
    /// sum to 100 are percentages, parts that sum to 1 are fractions.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(CorpusError::InvalidRatios(format!(
                "expected train:validation:test, got {s:?}"
            )));
        }
        let decimals = parts
            .iter()
            .map(|p| parse_decimal(p.trim()))
            .collect::<Result<Vec<_>>>()?;
        let scale = decimals
            .iter()
            .map(|&(_, digits)| digits)
            .max()
            .unwrap_or(0);
        let numerators: Vec<u64> = decimals
            .iter()
            .map(|&(value, digits)| value * 10u64.pow(scale - digits))
            .collect();
        let sum: u64 = numerators.iter().sum();
        let one = 10u64.pow(scale);
        let denominator = if sum == 100 * one {
            100 * one
        } else if sum == one {
            one
        } else {
            return Err(CorpusError::InvalidRatios(format!(
                "{s:?} sums to neither 1 nor 100"
            )));
        };
        Self::from_parts(numerators[0], numerators[1], numerators[2], denominator)
    }
}

/// Returns (digits as integer, number of fractional digits).
fn parse_decimal(s: &str) -> Result<(u64, u32)> {
    let bad = || CorpusError::InvalidRatios(format!("{s:?} is not a non-negative decimal"));
    let (int_part, frac_part) = s.split_once('.').unwrap_or((s, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
        || frac_part.len() > 9
    {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let value = if digits.is_empty() {
        0
    } else {
        digits.parse().map_err(|_| bad())?
    };
    Ok((value, frac_part.len() as u32))
}

impl fmt::Display for SplitRatios {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{} (/{})",
            self.train, self.validation, self.test, self.denominator
        )
    }
}

/// Uniform integer in `0..bound` by rejection, so the stream depends only
/// on the generator output.
fn uniform_below(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let span = 1u128 << 64;
    let limit = span - span % bound as u128;
    loop {
        let x = rng.next_u64() as u128;
        if x < limit {
            return (x % bound as u128) as u64;
        }
    }
}

/// Deterministic permutation of `0..n`.
///
/// The generator is ChaCha8 seeded through `SeedableRng::seed_from_u64`
/// (PCG32 seed expansion). A Fisher-Yates pass runs `i` from `n-1` down to
/// `1`, swapping `i` with a uniform index in `0..=i`.
pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = uniform_below(&mut rng, i as u64 + 1) as usize;
        order.swap(i, j);
    }
    order
}

/// Shuffles with [`shuffled_indices`] and slices the permutation into
/// test, validation and train, in that order. Returns `(train, validation,
/// test)`.
pub fn split_corpus(
    corpus: &Corpus,
    ratios: &SplitRatios,
    seed: u64,
) -> Result<(Corpus, Corpus, Corpus)> {
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let n = corpus.len();
    let (_, n_val, n_test) = ratios.sizes(n);
    let order = shuffled_indices(n, seed);
    let take =
        |idx: &[usize]| Corpus::from_subset(idx.iter().map(|&i| corpus.pairs[i].clone()).collect());
    let test = take(&order[..n_test]);
    let validation = take(&order[n_test..n_test + n_val]);
    let train = take(&order[n_test + n_val..]);
    Ok((train, validation, test))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DedupKey {
    Source,
    Candidate,
    #[default]
    Pair,
}

impl FromStr for DedupKey {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "source" => Ok(Self::Source),
            "candidate" => Ok(Self::Candidate),
            "pair" => Ok(Self::Pair),
            other => Err(format!(
                "unknown dedup key {other:?} (expected source, candidate or pair)"
            )),
        }
    }
}

fn dedup_key(pair: &SentencePair, key: DedupKey) -> (String, String) {
    match key {
        DedupKey::Source => (normalize(&pair.source), String::new()),
        DedupKey::Candidate => (normalize(&pair.candidate), String::new()),
        DedupKey::Pair => (normalize(&pair.source), normalize(&pair.candidate)),
    }
}

/// Keeps the first pair for each normalized key, preserving order.
pub fn dedup_corpus(corpus: &Corpus, key: DedupKey) -> Corpus {
    let mut seen: HashMap<(String, String), ()> = HashMap::with_capacity(corpus.len());
    let pairs = corpus
        .iter()
        .filter(|pair| seen.insert(dedup_key(pair, key), ()).is_none())
        .cloned()
        .collect();
    Corpus::from_subset(pairs)
}
