mod common;

use common::*;
use parafilter_core::corpus::{dedup_corpus, DedupKey};
use parafilter_core::embed::{bert_score, TokenEmbeddingMatrix};
use parafilter_core::ngram::{
    corpus_bleu, has_ngram_repeat, lcs_len, pinc, rouge_l_f1, sentence_bleu, sentence_bleu_multi,
    BleuConfig, PincConfig,
};
use parafilter_core::textnorm::normalize;
use parafilter_core::{Corpus, SentencePair};

#[test]
fn pinc_matches_set_oracle() {
    let mut r = rng(1);
    for max_n in [1, 2, 4, 8] {
        let cfg = PincConfig::new(max_n).unwrap();
        for _ in 0..500 {
            let s = random_tokens(&mut r, 1, 8, 6);
            let c = random_tokens(&mut r, 1, 8, 6);
            let got = pinc(&s, &c, &cfg).unwrap();
            let want = pinc_oracle(&s, &c, max_n);
            assert!((got - want).abs() < 1e-12, "{s:?} {c:?}: {got} vs {want}");
        }
    }
}

#[test]
fn sentence_bleu_matches_count_tables() {
    let mut r = rng(2);
    let cfg = BleuConfig::default();
    for _ in 0..500 {
        let hyp = random_tokens(&mut r, 1, 8, 4);
        let nrefs = 1 + below(&mut r, 3) as usize;
        let refs: Vec<Vec<String>> = (0..nrefs).map(|_| random_tokens(&mut r, 1, 8, 4)).collect();
        let got = sentence_bleu_multi(&refs, &hyp, &cfg).unwrap();
        let want = sentence_bleu_oracle(&refs, &hyp);
        assert!(
            (got - want).abs() < 1e-12,
            "{refs:?} {hyp:?}: {got} vs {want}"
        );
        if nrefs == 1 {
            assert_eq!(sentence_bleu(&refs[0], &hyp, &cfg).unwrap(), got);
        }
    }
}

#[test]
fn corpus_bleu_matches_count_tables() {
    let mut r = rng(3);
    let cfg = BleuConfig::default();
    for _ in 0..100 {
        let n = 1 + below(&mut r, 6) as usize;
        let hyps: Vec<Vec<String>> = (0..n).map(|_| random_tokens(&mut r, 1, 8, 4)).collect();
        let refs: Vec<Vec<Vec<String>>> = (0..n)
            .map(|_| {
                (0..1 + below(&mut r, 2))
                    .map(|_| random_tokens(&mut r, 1, 8, 4))
                    .collect()
            })
            .collect();
        let got = corpus_bleu(&refs, &hyps, &cfg).unwrap();
        let want = corpus_bleu_oracle(&refs, &hyps);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn lcs_and_rouge_match_enumeration() {
    let mut r = rng(4);
    for _ in 0..500 {
        let a = random_tokens(&mut r, 1, 8, 4);
        let b = random_tokens(&mut r, 1, 8, 4);
        assert_eq!(lcs_len(&a, &b), lcs_oracle(&a, &b), "{a:?} {b:?}");
        let got = rouge_l_f1(&a, &b).unwrap();
        assert!((got - rouge_l_oracle(&a, &b)).abs() < 1e-12);
    }
}

#[test]
fn repeat_matches_window_enumeration() {
    let mut r = rng(5);
    for _ in 0..500 {
        let t = random_tokens(&mut r, 0, 8, 3);
        for n in 1..=4 {
            let windows: Vec<&[String]> = if t.len() >= n {
                t.windows(n).collect()
            } else {
                vec![]
            };
            let mut repeated = false;
            for i in 0..windows.len() {
                for j in i + 1..windows.len() {
                    repeated |= windows[i] == windows[j];
                }
            }
            assert_eq!(has_ngram_repeat(&t, n), repeated, "{t:?} n={n}");
        }
    }
}

#[test]
fn bertscore_matches_pairwise_table() {
    let mut r = rng(6);
    for _ in 0..500 {
        let dim = 1 + below(&mut r, 8) as usize;
        let (na, nb) = (1 + below(&mut r, 5) as usize, 1 + below(&mut r, 5) as usize);
        let a = random_rows(&mut r, na, dim);
        let b = random_rows(&mut r, nb, dim);
        let ma = TokenEmbeddingMatrix::from_rows("a", &a).unwrap();
        let mb = TokenEmbeddingMatrix::from_rows("b", &b).unwrap();
        let got = bert_score(&ma, &mb).unwrap();
        let (p, rc, f) = bertscore_oracle(&a, &b);
        assert!((got.precision - p).abs() < 1e-6);
        assert!((got.recall - rc).abs() < 1e-6);
        assert!((got.f1 - f).abs() < 1e-6);
    }
}

#[test]
fn dedup_matches_quadratic_scan() {
    let mut r = rng(7);
    let texts = ["ক খ", "ক  খ", "গ", "ঘ ঙ।", "ঘ ঙ।\u{200B}", "চ"];
    for _ in 0..200 {
        let n = below(&mut r, 12) as usize;
        let pairs: Vec<SentencePair> = (0..n)
            .map(|i| {
                SentencePair::new(
                    format!("{i}"),
                    texts[below(&mut r, texts.len() as u64) as usize],
                    texts[below(&mut r, texts.len() as u64) as usize],
                )
            })
            .collect();
        let corpus = Corpus::new(pairs.clone()).unwrap();
        for key in [DedupKey::Source, DedupKey::Candidate, DedupKey::Pair] {
            let k = |p: &SentencePair| match key {
                DedupKey::Source => (normalize(&p.source), String::new()),
                DedupKey::Candidate => (normalize(&p.candidate), String::new()),
                DedupKey::Pair => (normalize(&p.source), normalize(&p.candidate)),
            };
            let expected: Vec<&str> = pairs
                .iter()
                .enumerate()
                .filter(|(i, p)| pairs[..*i].iter().all(|q| k(q) != k(p)))
                .map(|(_, p)| p.id.as_str())
                .collect();
            let got = dedup_corpus(&corpus, key);
            let ids: Vec<&str> = got.iter().map(|p| p.id.as_str()).collect();
            assert_eq!(ids, expected);
        }
    }
}

#[test]
fn hand_fixtures() {
    let cfg = PincConfig::default();
    assert_eq!(
        pinc(&toks("a b c"), &toks("a b d"), &cfg).unwrap(),
        11.0 / 18.0
    );
    let f1 = rouge_l_f1(&toks("a b c d"), &toks("a c d")).unwrap();
    assert!((f1 - 6.0 / 7.0).abs() < 1e-12);
    let bleu = sentence_bleu(&toks("a b c d"), &toks("a b"), &BleuConfig::default()).unwrap();
    assert!((bleu - (-1.0f64).exp()).abs() < 1e-9);
}
