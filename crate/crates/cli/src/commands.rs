use std::collections::{HashMap, HashSet};
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use parafilter_core::augment::{
    merge_fills, plan_masks, AugmentConfig, MaskFill, MaskPlan, TaggedSentence,
};
use parafilter_core::corpus::{
    dedup_corpus, read_corpus, split_corpus, write_corpus, CorpusFormat,
};
use parafilter_core::embed::{self, candidate_key, load_store, save_store, source_key, MockMode};
use parafilter_core::filter::{
    filter_corpus, select_candidates, CandidateGroup, CandidateSelectionConfig, FilterConfig,
    PipelineStats, Stage,
};
use parafilter_core::ngram::PincConfig;
use parafilter_core::report::{self, CorpusSummary, ReportConfig};
use parafilter_core::sweep::{self, histogram, uniform_edges, yield_curve, SweepMetric};
use parafilter_core::{Corpus, EmbeddingStore, SentencePair};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{
    usage, AugmentMergeArgs, AugmentPlanArgs, CorpusIn, DedupArgs, FilterArgs, FilterFlags,
    HistArgs, MockEmbedArgs, PosOrder, Preset, ScoreArgs, SelectArgs, SplitArgs, StoreArgs,
    SweepArgs,
};

fn read_in(c: &CorpusIn) -> Result<Corpus> {
    let format = c
        .format
        .unwrap_or_else(|| CorpusFormat::from_path(&c.input));
    Ok(read_corpus(&c.input, format)?)
}

fn write_out(corpus: &Corpus, path: &Path) -> Result<()> {
    Ok(write_corpus(corpus, path, CorpusFormat::from_path(path))?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_jsonl<T: Serialize>(w: &mut dyn Write, items: impl IntoIterator<Item = T>) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut *w, &item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .with_context(|| format!("{} line {}", path.display(), i + 1))?;
        out.push(item);
    }
    Ok(out)
}

fn resolve_store(args: &StoreArgs) -> Result<Option<EmbeddingStore>> {
    match (&args.store, args.no_embeddings) {
        (Some(path), _) => Ok(Some(load_store(path)?)),
        (None, true) => Ok(None),
        (None, false) => Err(usage(
            "embedding metrics need --store; pass --no-embeddings to skip them",
        )),
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

fn print_summary(s: &CorpusSummary) {
    let row = |name: &str, value: Option<f64>| {
        eprintln!(
            "{name:<16} {}",
            value.map(pct).unwrap_or_else(|| "-".into())
        );
    };
    eprintln!("{:<16} {}", "pairs", s.pairs);
    row("PINC", Some(s.pinc));
    row("self-BLEU", Some(s.self_bleu));
    row("BLEU", s.corpus_bleu);
    row("ROUGE-L", s.rouge_l_f1);
    row("BERTScore", s.bertscore_f1);
    row("BERT-iBLEU", s.bert_ibleu);
    if s.bert_ibleu_undefined > 0 {
        eprintln!(
            "BERT-iBLEU undefined for {} pairs with BERTScore F1 <= 0",
            s.bert_ibleu_undefined
        );
    }
}

pub fn score(a: ScoreArgs) -> Result<()> {
    let store = resolve_store(&a.store)?;
    let corpus = read_in(&a.corpus)?;
    let report = report::score_corpus(&corpus, store.as_ref(), &ReportConfig::default())?;
    write_jsonl(&mut *sink(a.output.as_deref())?, &report.pairs)?;
    if let Some(path) = &a.summary {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &report.summary)?;
        w.write_all(b"\n")?;
        w.flush()?;
    }
    print_summary(&report.summary);
    Ok(())
}

fn filter_config(flags: &FilterFlags, embeddings: bool) -> Result<FilterConfig> {
    let mut cfg = match flags.preset {
        Preset::Main => FilterConfig::default(),
        Preset::Augment => FilterConfig::augmentation(),
    };
    if let Some(v) = flags.pinc_min {
        cfg.pinc_min = v;
    }
    if let Some(v) = flags.bert_min {
        cfg.bert_min = v;
    }
    if let Some(v) = flags.bert_max {
        cfg.bert_max = v;
    }
    if let Some(v) = flags.repeat_n {
        cfg.repeat_n = v;
    }
    cfg.require_terminal_punct = !flags.no_punctuation;
    cfg.bertscore_enabled = embeddings;
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn print_stats(stats: &PipelineStats) {
    let share = |n: usize| {
        if stats.input == 0 {
            "-".to_string()
        } else {
            format!("{}%", pct(n as f64 / stats.input as f64))
        }
    };
    eprintln!("{:<20} {:>10} {:>9}", "stage", "rejected", "share");
    for stage in Stage::ALL {
        let n = stats.rejected.get(stage);
        eprintln!("{:<20} {:>10} {:>9}", stage.title(), n, share(n));
    }
    eprintln!(
        "{:<20} {:>10} {:>9}",
        "passed",
        stats.passed,
        share(stats.passed)
    );
    eprintln!("{:<20} {:>10}", "input", stats.input);
}

pub fn filter(a: FilterArgs) -> Result<()> {
    let cfg = filter_config(&a.flags, !a.store.no_embeddings)?;
    let store = resolve_store(&a.store)?;
    let corpus = read_in(&a.corpus)?;
    let run = filter_corpus(&corpus, store.as_ref(), &cfg)?;
    write_out(&run.corpus, &a.output)?;
    if let Some(path) = &a.outcomes {
        write_jsonl(&mut create(path)?, &run.outcomes)?;
    }
    if let Some(path) = &a.stats {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &run.stats)?;
        w.write_all(b"\n")?;
        w.flush()?;
    }
    print_stats(&run.stats);
    Ok(())
}

fn metric_store(metric: SweepMetric, path: Option<&Path>) -> Result<Option<EmbeddingStore>> {
    match path {
        Some(p) => Ok(Some(load_store(p)?)),
        None if metric.needs_store() => Err(usage(format!("metric {metric} needs --store"))),
        None => Ok(None),
    }
}

fn ascending(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite()) && values.windows(2).all(|w| w[0] < w[1])
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    if a.thresholds.is_empty() || !ascending(&a.thresholds) {
        return Err(usage("--thresholds must be finite and strictly ascending"));
    }
    let store = metric_store(a.metric, a.store.as_deref())?;
    let corpus = read_in(&a.corpus)?;
    let scores = sweep::score_corpus(&corpus, store.as_ref(), a.metric, &PincConfig::default())?;
    let curve = yield_curve(a.metric.name(), &scores, &a.thresholds)?;
    let mut w = sink(a.output.as_deref())?;
    w.write_all(curve.to_csv().as_bytes())?;
    w.flush()?;
    for (t, y) in curve.thresholds.iter().zip(&curve.yields) {
        eprintln!("{} >= {t}: {}%", a.metric, pct(*y));
    }
    Ok(())
}

pub fn hist(a: HistArgs) -> Result<()> {
    let edges = match &a.edges {
        Some(e) if e.len() >= 2 && ascending(e) => e.clone(),
        Some(_) => {
            return Err(usage(
                "--edges needs at least two strictly ascending values",
            ))
        }
        None => uniform_edges(a.range[0], a.range[1], a.bins).map_err(|e| usage(e.to_string()))?,
    };
    let store = metric_store(a.metric, a.store.as_deref())?;
    let corpus = read_in(&a.corpus)?;
    let scores = sweep::score_corpus(&corpus, store.as_ref(), a.metric, &PincConfig::default())?;
    let h = histogram(a.metric.name(), &scores, &edges)?;
    let mut w = sink(a.output.as_deref())?;
    w.write_all(h.to_csv().as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn split(a: SplitArgs) -> Result<()> {
    let format = a
        .corpus
        .format
        .unwrap_or_else(|| CorpusFormat::from_path(&a.corpus.input));
    let corpus = read_in(&a.corpus)?;
    let (train, validation, test) = split_corpus(&corpus, &a.ratios, a.seed)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let ext = match format {
        CorpusFormat::JsonLines => "jsonl",
        CorpusFormat::Tsv => "tsv",
    };
    for (name, part) in [
        ("train", &train),
        ("validation", &validation),
        ("test", &test),
    ] {
        let path: PathBuf = a.out_dir.join(format!("{name}.{ext}"));
        write_corpus(part, &path, format)?;
        eprintln!("{name:<11} {:>8}", part.len());
    }
    Ok(())
}

pub fn dedup(a: DedupArgs) -> Result<()> {
    let corpus = read_in(&a.corpus)?;
    let kept = dedup_corpus(&corpus, a.key);
    write_out(&kept, &a.output)?;
    eprintln!("kept {} of {} pairs", kept.len(), corpus.len());
    Ok(())
}

fn augment_config(pos: &PosOrder) -> Result<AugmentConfig> {
    match &pos.pos_order {
        None => Ok(AugmentConfig::default()),
        Some(order) => AugmentConfig::new(order.clone(), FilterConfig::augmentation())
            .map_err(|e| usage(e.to_string())),
    }
}

fn read_plans(path: &Path, cfg: &AugmentConfig) -> Result<Vec<MaskPlan>> {
    let sentences: Vec<TaggedSentence> = read_jsonl(path)?;
    let mut seen = HashSet::new();
    let mut plans = Vec::with_capacity(sentences.len());
    for s in &sentences {
        if !seen.insert(s.id.as_str()) {
            bail!("{}: duplicate sentence id {:?}", path.display(), s.id);
        }
        plans.push(plan_masks(s, cfg)?);
    }
    Ok(plans)
}

fn group_fills(path: &Path, plans: &[MaskPlan]) -> Result<HashMap<String, Vec<MaskFill>>> {
    let known: HashSet<&str> = plans.iter().map(|p| p.plan_id.as_str()).collect();
    let mut grouped: HashMap<String, Vec<MaskFill>> = HashMap::new();
    for fill in read_jsonl::<MaskFill>(path)? {
        if !known.contains(fill.plan_id.as_str()) {
            bail!(
                "{}: fill for unknown plan {:?}",
                path.display(),
                fill.plan_id
            );
        }
        grouped.entry(fill.plan_id.clone()).or_default().push(fill);
    }
    Ok(grouped)
}

pub fn augment_plan(a: AugmentPlanArgs) -> Result<()> {
    let cfg = augment_config(&a.pos)?;
    let plans = read_plans(&a.tagged, &cfg)?;
    let mut requests = Vec::new();
    match &a.fills {
        None => {
            for plan in &plans {
                requests.extend(plan.requests());
            }
        }
        Some(path) => {
            let fills = group_fills(path, &plans)?;
            for plan in &plans {
                let prior = fills.get(&plan.plan_id).map(Vec::as_slice).unwrap_or(&[]);
                let next = prior.len();
                let mut steps: Vec<usize> = prior.iter().map(|f| f.step).collect();
                steps.sort_unstable();
                if steps != (0..next).collect::<Vec<_>>() {
                    bail!(
                        "plan {:?}: fills must cover steps 0..{next} exactly once",
                        plan.plan_id
                    );
                }
                if next < plan.len() {
                    requests.push(plan.request(next, prior)?);
                }
            }
        }
    }
    write_jsonl(&mut *sink(a.output.as_deref())?, &requests)?;
    eprintln!("{} requests from {} sentences", requests.len(), plans.len());
    Ok(())
}

pub fn augment_merge(a: AugmentMergeArgs) -> Result<()> {
    if !a.refilter && (a.store.store.is_some() || a.store.no_embeddings) {
        return Err(usage(
            "--store and --no-embeddings only apply with --refilter",
        ));
    }
    let cfg = augment_config(&a.pos)?;
    let mut refilter = cfg.refilter;
    refilter.bertscore_enabled = !a.store.no_embeddings;
    let store = if a.refilter {
        resolve_store(&a.store)?
    } else {
        None
    };
    let corpus = read_in(&a.corpus)?;
    let plans = read_plans(&a.tagged, &cfg)?;
    let fills = group_fills(&a.fills, &plans)?;
    let by_id: HashMap<&str, &MaskPlan> = plans.iter().map(|p| (p.plan_id.as_str(), p)).collect();
    let mut merged = Vec::new();
    let mut skipped = 0usize;
    for pair in &corpus {
        let Some(plan) = by_id.get(pair.id.as_str()) else {
            skipped += 1;
            continue;
        };
        let pair_fills = fills.get(&pair.id).map(Vec::as_slice).unwrap_or(&[]);
        merged.push(merge_fills(pair, plan, pair_fills)?);
    }
    let mut augmented = Corpus::new(merged)?;
    if a.refilter {
        let run = filter_corpus(&augmented, store.as_ref(), &refilter)?;
        print_stats(&run.stats);
        augmented = run.corpus;
    }
    let mut out: Vec<SentencePair> = Vec::with_capacity(augmented.len() * a.repeat as usize);
    for pair in augmented.iter() {
        out.push(pair.clone());
        for copy in 2..=a.repeat {
            let mut dup = pair.clone();
            dup.id = format!("{}.{copy}", pair.id);
            out.push(dup);
        }
    }
    let out = Corpus::new(out)?;
    write_out(&out, &a.output)?;
    eprintln!(
        "wrote {} augmented pairs ({} pairs had no tagged sentence)",
        out.len(),
        skipped
    );
    Ok(())
}

pub fn select(a: SelectArgs) -> Result<()> {
    let cfg = CandidateSelectionConfig::new(a.threshold).map_err(|e| usage(e.to_string()))?;
    let groups: Vec<CandidateGroup> = read_jsonl(&a.input)?;
    let total: usize = groups.iter().map(|g| g.candidates.len()).sum();
    let pairs: Vec<SentencePair> = groups
        .iter()
        .flat_map(|g| select_candidates(g, &cfg))
        .collect();
    let corpus = Corpus::new(pairs)?;
    write_out(&corpus, &a.output)?;
    eprintln!("kept {} of {} candidates", corpus.len(), total);
    Ok(())
}

pub fn mock_embed(a: MockEmbedArgs) -> Result<()> {
    if a.dim < 2 {
        return Err(usage("--dim must be at least 2"));
    }
    let corpus = read_in(&a.corpus)?;
    let mode = match a.mode {
        MockMode::Tokens => "tokens",
        MockMode::Sentence => "sentence",
    };
    let mut store = EmbeddingStore::new(a.dim, format!("mock-sha256 mode={mode} dim={}", a.dim))?;
    for pair in &corpus {
        store.insert(embed::mock_embed(
            source_key(&pair.id),
            &pair.source,
            a.dim,
            a.mode,
        )?)?;
        store.insert(embed::mock_embed(
            candidate_key(&pair.id),
            &pair.candidate,
            a.dim,
            a.mode,
        )?)?;
    }
    save_store(&store, &a.output)?;
    eprintln!("wrote {} matrices of dim {}", store.len(), a.dim);
    Ok(())
}
