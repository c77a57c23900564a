//! Brute-force oracles and fixture builders shared by the integration tests.
//!
//! The oracles are written as directly as possible from the metric
//! definitions, with linear scans instead of hash maps, so they share no
//! code with the library.

#![allow(dead_code)]

use parafilter_core::embed::{candidate_key, source_key, EmbeddingStore, TokenEmbeddingMatrix};
use parafilter_core::{Corpus, SentencePair};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn below(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    rng.next_u64() % n
}

pub fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// Random token sequence with length in `min_len..=max_len` over an
/// alphabet of `alphabet` single-letter tokens.
pub fn random_tokens(
    rng: &mut ChaCha8Rng,
    min_len: usize,
    max_len: usize,
    alphabet: usize,
) -> Vec<String> {
    let span = (max_len - min_len + 1) as u64;
    let len = min_len + below(rng, span) as usize;
    (0..len)
        .map(|_| char::from(b'a' + below(rng, alphabet as u64) as u8).to_string())
        .collect()
}

fn grams(tokens: &[String], n: usize) -> Vec<Vec<String>> {
    if n > tokens.len() {
        return Vec::new();
    }
    (0..=tokens.len() - n)
        .map(|i| tokens[i..i + n].to_vec())
        .collect()
}

fn distinct(list: Vec<Vec<String>>) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = Vec::new();
    for g in list {
        if !out.contains(&g) {
            out.push(g);
        }
    }
    out
}

fn count_in(list: &[Vec<String>], g: &[String]) -> u64 {
    list.iter().filter(|x| x.as_slice() == g).count() as u64
}

/// PINC over distinct n-gram sets, skipping orders the candidate is too
/// short for.
pub fn pinc_oracle(source: &[String], candidate: &[String], max_n: usize) -> f64 {
    let mut sum = 0.0;
    let mut levels = 0;
    for n in 1..=max_n {
        let cand = distinct(grams(candidate, n));
        if cand.is_empty() {
            continue;
        }
        let src = distinct(grams(source, n));
        let novel = cand.iter().filter(|g| !src.contains(g)).count();
        sum += novel as f64 / cand.len() as f64;
        levels += 1;
    }
    sum / levels as f64
}

/// Per-order clipped match and total counts plus lengths, from explicit
/// count tables.
pub fn bleu_counts(
    references: &[Vec<String>],
    hypothesis: &[String],
    max_n: usize,
) -> (Vec<u64>, Vec<u64>, u64, u64) {
    let mut matches = vec![0; max_n];
    let mut totals = vec![0; max_n];
    for n in 1..=max_n {
        let hyp = grams(hypothesis, n);
        for g in distinct(hyp.clone()) {
            let c = count_in(&hyp, &g);
            let clip = references
                .iter()
                .map(|r| count_in(&grams(r, n), &g))
                .max()
                .unwrap_or(0);
            matches[n - 1] += c.min(clip);
            totals[n - 1] += c;
        }
    }
    let h = hypothesis.len() as i64;
    let mut best = references[0].len() as i64;
    for r in references {
        let l = r.len() as i64;
        if (l - h).abs() < (best - h).abs() || ((l - h).abs() == (best - h).abs() && l < best) {
            best = l;
        }
    }
    (matches, totals, hypothesis.len() as u64, best as u64)
}

/// Geometric mean of floor-smoothed precisions over orders with a nonzero
/// hypothesis count, times the brevity penalty.
pub fn bleu_from_counts(
    matches: &[u64],
    totals: &[u64],
    hyp_len: u64,
    ref_len: u64,
    eps: f64,
) -> f64 {
    let mut logs = Vec::new();
    for (m, t) in matches.iter().zip(totals) {
        if *t == 0 {
            continue;
        }
        let num = if *m == 0 { eps } else { *m as f64 };
        logs.push((num / *t as f64).ln());
    }
    let bp = if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    bp * (logs.iter().sum::<f64>() / logs.len() as f64).exp()
}

pub fn sentence_bleu_oracle(references: &[Vec<String>], hypothesis: &[String]) -> f64 {
    let (m, t, h, r) = bleu_counts(references, hypothesis, 4);
    bleu_from_counts(&m, &t, h, r, 0.1)
}

pub fn corpus_bleu_oracle(references: &[Vec<Vec<String>>], hypotheses: &[Vec<String>]) -> f64 {
    let mut m = vec![0; 4];
    let mut t = vec![0; 4];
    let (mut h, mut r) = (0, 0);
    for (refs, hyp) in references.iter().zip(hypotheses) {
        let (mi, ti, hi, ri) = bleu_counts(refs, hyp, 4);
        for k in 0..4 {
            m[k] += mi[k];
            t[k] += ti[k];
        }
        h += hi;
        r += ri;
    }
    bleu_from_counts(&m, &t, h, r, 0.1)
}

fn is_subsequence(needle: &[&String], hay: &[String]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == *n))
}

/// LCS length by enumerating every subsequence of `a`. Exponential; keep
/// inputs short.
pub fn lcs_oracle(a: &[String], b: &[String]) -> usize {
    assert!(a.len() <= 16);
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let picked: Vec<&String> = (0..a.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &a[i])
            .collect();
        if picked.len() > best && is_subsequence(&picked, b) {
            best = picked.len();
        }
    }
    best
}

pub fn rouge_l_oracle(reference: &[String], hypothesis: &[String]) -> f64 {
    let l = lcs_oracle(reference, hypothesis) as f64;
    if l == 0.0 {
        return 0.0;
    }
    let p = l / hypothesis.len() as f64;
    let r = l / reference.len() as f64;
    2.0 * p * r / (p + r)
}

/// BERTScore from the full pairwise cosine table.
pub fn bertscore_oracle(reference: &[Vec<f32>], candidate: &[Vec<f32>]) -> (f64, f64, f64) {
    let cos = |u: &[f32], v: &[f32]| {
        let d: f64 = u.iter().zip(v).map(|(a, b)| *a as f64 * *b as f64).sum();
        let nu: f64 = u.iter().map(|a| (*a as f64).powi(2)).sum::<f64>().sqrt();
        let nv: f64 = v.iter().map(|a| (*a as f64).powi(2)).sum::<f64>().sqrt();
        d / (nu * nv)
    };
    let table: Vec<Vec<f64>> = reference
        .iter()
        .map(|r| candidate.iter().map(|c| cos(r, c)).collect())
        .collect();
    let recall = table
        .iter()
        .map(|row| row.iter().cloned().fold(f64::MIN, f64::max))
        .sum::<f64>()
        / reference.len() as f64;
    let precision = (0..candidate.len())
        .map(|j| table.iter().map(|row| row[j]).fold(f64::MIN, f64::max))
        .sum::<f64>()
        / candidate.len() as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

/// Rows with entries in [-1, 1] and a norm safely above zero.
pub fn random_rows(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> Vec<Vec<f32>> {
    (0..rows)
        .map(|_| loop {
            let row: Vec<f32> = (0..dim).map(|_| (unit(rng) * 2.0 - 1.0) as f32).collect();
            if row.iter().map(|x| x * x).sum::<f32>() > 1e-3 {
                break row;
            }
        })
        .collect()
}

/// Two-dimensional single-row embedding pair whose cosine is `f1`, so the
/// BERTScore F1 of the pair is `f1` up to f32 rounding.
pub fn insert_with_f1(store: &mut EmbeddingStore, id: &str, f1: f64) {
    let src = TokenEmbeddingMatrix::new(source_key(id), 2, vec![1.0, 0.0]).unwrap();
    let cand = TokenEmbeddingMatrix::new(
        candidate_key(id),
        2,
        vec![f1 as f32, (1.0 - f1 * f1).max(0.0).sqrt() as f32],
    )
    .unwrap();
    store.insert(src).unwrap();
    store.insert(cand).unwrap();
}

/// Planted labels for the filter fixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plant {
    Pass,
    Pinc,
    BertLow,
    BertHigh,
    Repetition,
    Punctuation,
}

fn words(prefix: &str, i: usize, n: usize) -> Vec<String> {
    (0..n).map(|k| format!("{prefix}{i}x{k}")).collect()
}

/// One pair that fails exactly the planted stage (or none) under the
/// default thresholds.
pub fn planted_pair(i: usize, plant: Plant) -> (SentencePair, f64) {
    let src = words("উৎস", i, 6);
    let mut cand = words("প্রার্থী", i, 6);
    let mut f1 = 0.95;
    let mut terminal = true;
    match plant {
        Plant::Pass => {}
        Plant::Pinc => cand = src.clone(),
        Plant::BertLow => f1 = 0.90,
        Plant::BertHigh => f1 = 0.99,
        Plant::Repetition => {
            cand[2] = cand[0].clone();
            cand[3] = cand[1].clone();
        }
        Plant::Punctuation => terminal = false,
    }
    let source = format!("{}।", src.join(" "));
    let candidate = if terminal {
        format!("{}।", cand.join(" "))
    } else {
        cand.join(" ")
    };
    (SentencePair::new(format!("p{i:04}"), source, candidate), f1)
}

/// Corpus and store from a plant list, in order.
pub fn planted_corpus(plants: &[Plant]) -> (Corpus, EmbeddingStore) {
    let mut store = EmbeddingStore::new(2, "planted").unwrap();
    let mut pairs = Vec::with_capacity(plants.len());
    for (i, &plant) in plants.iter().enumerate() {
        let (pair, f1) = planted_pair(i, plant);
        insert_with_f1(&mut store, &pair.id, f1);
        pairs.push(pair);
    }
    (Corpus::new(pairs).unwrap(), store)
}

/// Random corpus in which candidates share a random number of tokens with
/// their source and BERTScore F1 is spread over [0.85, 1.0].
pub fn mixed_corpus(seed: u64, n: usize) -> (Corpus, EmbeddingStore) {
    let mut r = rng(seed);
    let mut store = EmbeddingStore::new(2, "mixed").unwrap();
    let mut pairs = Vec::with_capacity(n);
    for i in 0..n {
        let len = 3 + below(&mut r, 6) as usize;
        let src = words("w", i, len);
        let cand: Vec<String> = src
            .iter()
            .enumerate()
            .map(|(k, w)| {
                if below(&mut r, 2) == 0 {
                    w.clone()
                } else {
                    format!("alt{i}x{k}")
                }
            })
            .collect();
        let end = if below(&mut r, 8) == 0 { "" } else { "।" };
        let pair = SentencePair::new(
            format!("m{i}"),
            format!("{}।", src.join(" ")),
            format!("{}{end}", cand.join(" ")),
        );
        insert_with_f1(&mut store, &pair.id, 0.85 + 0.15 * unit(&mut r));
        pairs.push(pair);
    }
    (Corpus::new(pairs).unwrap(), store)
}

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}
