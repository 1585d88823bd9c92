//! Cross-lingual article alignment, parallel sentence extraction,
//! monolingual paraphrase mining and the adversarial benchmark round trip.

mod benchmark;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Sentence};
use crate::embed::{cosine_slices, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::hashing::char_len;
use crate::providers::{embed_unique, EmbeddingProvider};
use crate::tsv;

pub use benchmark::{
    build_benchmark_candidates, import_review, read_benchmark, read_review_tsv, write_benchmark, write_review_tsv,
    BenchmarkItem, CandidateOutcome, ParaphraseTriple, ReviewStatus, REVIEW_HEADER,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinerConfig {
    pub article_threshold: f64,
    pub sentence_threshold: f64,
    /// Maximum |Δ published_at| between matched articles.
    pub window_hours: f64,
    /// Maximum relative length difference, measured against the longer text.
    pub max_length_diff: f64,
    /// Keep an article pair only if the source is also the target's best match.
    pub mutual_best: bool,
    /// Keep at most one source article per target article.
    pub dedup_article_targets: bool,
}

impl Default for MinerConfig {
    fn default() -> Self {
        Self {
            article_threshold: 0.65,
            sentence_threshold: 0.7,
            window_hours: 24.0,
            max_length_diff: 0.5,
            mutual_best: false,
            dedup_article_targets: false,
        }
    }
}

impl MinerConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |key: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{key} = {v} is outside the allowed range (0, 1)")))
            }
        };
        open_unit("article_threshold", self.article_threshold)?;
        open_unit("sentence_threshold", self.sentence_threshold)?;
        if !(self.window_hours > 0.0 && self.window_hours.is_finite()) {
            return Err(Error::InvalidConfig(format!("window_hours = {} must be positive", self.window_hours)));
        }
        if !(self.max_length_diff > 0.0 && self.max_length_diff <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "max_length_diff = {} is outside the allowed range (0, 1]",
                self.max_length_diff
            )));
        }
        Ok(())
    }

    pub fn window_secs(&self) -> i64 {
        (self.window_hours * 3600.0).round() as i64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticlePair {
    pub src_doc_id: String,
    pub tgt_doc_id: String,
    pub score: f64,
    pub src_lang: String,
    pub tgt_lang: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentencePair {
    pub src_text: String,
    pub tgt_text: String,
    pub score: f64,
    pub src_lang: String,
    pub tgt_lang: String,
    pub src_doc_id: String,
    pub tgt_doc_id: String,
    pub src_index: usize,
    pub tgt_index: usize,
}

/// Counts at every mining stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MiningStats {
    pub src_documents: usize,
    pub tgt_documents: usize,
    pub src_sentences: usize,
    pub tgt_sentences: usize,
    pub article_pairs: usize,
    pub sentence_matches: usize,
    pub rejected_length: usize,
    pub rejected_collision: usize,
    pub duplicates_removed: usize,
    pub sentence_pairs: usize,
}

#[derive(Debug, Clone, Default)]
pub struct MiningOutput {
    pub article_pairs: Vec<ArticlePair>,
    pub pairs: Vec<SentencePair>,
    pub stats: MiningStats,
}

/// True iff `(long - short) / long <= max_diff`, lengths in Unicode scalars.
pub fn length_ratio_ok(a: &str, b: &str, max_diff: f64) -> bool {
    let (la, lb) = (char_len(a), char_len(b));
    let (long, short) = if la >= lb { (la, lb) } else { (lb, la) };
    if long == 0 {
        return true;
    }
    (long - short) as f64 / long as f64 <= max_diff
}

fn body_matrix(docs: &[Document], provider: &dyn EmbeddingProvider) -> Result<EmbeddingMatrix> {
    let bodies: Vec<String> = docs.iter().map(|d| d.body.clone()).collect();
    embed_unique(provider, &bodies)
}

/// Strictly better, or equal with a smaller id.
fn better(score: f64, id: &str, best: Option<(f64, &str)>) -> bool {
    match best {
        None => true,
        Some((s, b)) => score > s || (score == s && id < b),
    }
}

/// Best candidate for each query document: within the window, not the same
/// document when `exclude_same_id`, highest cosine, ties to the smaller id.
fn best_articles(
    queries: &[Document],
    qm: &EmbeddingMatrix,
    candidates: &[Document],
    cm: &EmbeddingMatrix,
    window: i64,
    exclude_same_id: bool,
) -> Result<Vec<Option<(usize, f64)>>> {
    let mut by_time: Vec<usize> = (0..candidates.len()).collect();
    by_time.sort_by_key(|&i| candidates[i].published_at);
    let times: Vec<i64> = by_time.iter().map(|&i| candidates[i].published_at).collect();
    (0..queries.len())
        .into_par_iter()
        .map(|q| {
            let t = queries[q].published_at;
            let lo = times.partition_point(|&x| x < t.saturating_sub(window));
            let hi = times.partition_point(|&x| x <= t.saturating_add(window));
            let mut best: Option<(usize, f64)> = None;
            for &c in &by_time[lo..hi] {
                if exclude_same_id && candidates[c].id == queries[q].id {
                    continue;
                }
                let s = cosine_slices(qm.row(q), cm.row(c))?;
                if better(s, &candidates[c].id, best.map(|(b, bs)| (bs, candidates[b].id.as_str()))) {
                    best = Some((c, s));
                }
            }
            Ok(best)
        })
        .collect()
}

fn match_articles_inner(
    src: &[Document],
    tgt: &[Document],
    provider: &dyn EmbeddingProvider,
    cfg: &MinerConfig,
    monolingual: bool,
) -> Result<Vec<ArticlePair>> {
    if src.is_empty() || tgt.is_empty() {
        return Ok(Vec::new());
    }
    let sm = body_matrix(src, provider)?;
    let tm = if monolingual { sm.clone() } else { body_matrix(tgt, provider)? };
    let window = cfg.window_secs();
    let forward = best_articles(src, &sm, tgt, &tm, window, monolingual)?;
    let backward = if cfg.mutual_best { Some(best_articles(tgt, &tm, src, &sm, window, monolingual)?) } else { None };

    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for (s, best) in forward.into_iter().enumerate() {
        let Some((t, score)) = best else { continue };
        if score <= cfg.article_threshold {
            continue;
        }
        if let Some(back) = &backward {
            if back[t].map(|(b, _)| b) != Some(s) {
                continue;
            }
        }
        pairs.push((s, t, score));
    }
    if cfg.dedup_article_targets {
        let mut keep: HashMap<usize, (usize, f64)> = HashMap::new();
        for &(s, t, score) in &pairs {
            let replace = keep
                .get(&t)
                .is_none_or(|&(ks, kscore)| score > kscore || (score == kscore && src[s].id < src[ks].id));
            if replace {
                keep.insert(t, (s, score));
            }
        }
        pairs.retain(|&(s, t, _)| keep[&t].0 == s);
    }
    let mut out: Vec<ArticlePair> = pairs
        .into_iter()
        .map(|(s, t, score)| ArticlePair {
            src_doc_id: src[s].id.clone(),
            tgt_doc_id: tgt[t].id.clone(),
            score,
            src_lang: src[s].lang.clone(),
            tgt_lang: tgt[t].lang.clone(),
        })
        .collect();
    out.sort_by(|a, b| a.src_doc_id.cmp(&b.src_doc_id));
    Ok(out)
}

/// One pair per source document at most: the best target published within
/// the window whose body cosine exceeds the article threshold.
pub fn match_articles(
    src: &[Document],
    tgt: &[Document],
    provider: &dyn EmbeddingProvider,
    cfg: &MinerConfig,
) -> Result<Vec<ArticlePair>> {
    cfg.validate()?;
    match_articles_inner(src, tgt, provider, cfg, false)
}

#[derive(Debug, Clone, Copy, Default)]
struct SentenceCounts {
    matches: usize,
    rejected_length: usize,
    rejected_collision: usize,
}

/// Sentence matching over precomputed rows: best target above threshold,
/// then the length filter, then target-collision resolution.
fn match_sentence_rows(
    pair: &ArticlePair,
    src: &[Sentence],
    src_rows: &[&[f64]],
    tgt: &[Sentence],
    tgt_rows: &[&[f64]],
    cfg: &MinerConfig,
) -> Result<(Vec<SentencePair>, SentenceCounts)> {
    let mut counts = SentenceCounts::default();
    let mut chosen: Vec<(usize, usize, f64)> = Vec::new();
    for (i, srow) in src_rows.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (j, trow) in tgt_rows.iter().enumerate() {
            let s = cosine_slices(srow, trow)?;
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((j, s));
            }
        }
        let Some((j, score)) = best.filter(|&(_, s)| s > cfg.sentence_threshold) else { continue };
        counts.matches += 1;
        if !length_ratio_ok(&src[i].text, &tgt[j].text, cfg.max_length_diff) {
            counts.rejected_length += 1;
            continue;
        }
        chosen.push((i, j, score));
    }
    let mut winner: HashMap<usize, (usize, f64)> = HashMap::new();
    for &(i, j, score) in &chosen {
        let replace = winner.get(&j).is_none_or(|&(wi, ws)| score > ws || (score == ws && i < wi));
        if replace {
            winner.insert(j, (i, score));
        }
    }
    let before = chosen.len();
    chosen.retain(|&(i, j, _)| winner[&j].0 == i);
    counts.rejected_collision = before - chosen.len();
    let pairs = chosen
        .into_iter()
        .map(|(i, j, score)| SentencePair {
            src_text: src[i].text.clone(),
            tgt_text: tgt[j].text.clone(),
            score,
            src_lang: pair.src_lang.clone(),
            tgt_lang: pair.tgt_lang.clone(),
            src_doc_id: pair.src_doc_id.clone(),
            tgt_doc_id: pair.tgt_doc_id.clone(),
            src_index: src[i].index,
            tgt_index: tgt[j].index,
        })
        .collect();
    Ok((pairs, counts))
}

/// Parallel sentences of one aligned article pair.
pub fn match_sentences(
    pair: &ArticlePair,
    src: &[Sentence],
    tgt: &[Sentence],
    provider: &dyn EmbeddingProvider,
    cfg: &MinerConfig,
) -> Result<Vec<SentencePair>> {
    cfg.validate()?;
    if src.is_empty() || tgt.is_empty() {
        return Ok(Vec::new());
    }
    let texts: Vec<String> = src.iter().chain(tgt).map(|s| s.text.clone()).collect();
    let m = embed_unique(provider, &texts)?;
    let rows: Vec<&[f64]> = m.rows().collect();
    let (src_rows, tgt_rows) = rows.split_at(src.len());
    Ok(match_sentence_rows(pair, src, src_rows, tgt, tgt_rows, cfg)?.0)
}

fn sentences_by_doc(docs: &[Document]) -> Result<HashMap<String, Vec<Sentence>>> {
    docs.iter().map(|d| Ok((d.id.clone(), d.sentence_list()?))).collect()
}

fn mine_inner(
    src: &[Document],
    tgt: &[Document],
    article_provider: &dyn EmbeddingProvider,
    sentence_provider: &dyn EmbeddingProvider,
    cfg: &MinerConfig,
    monolingual: bool,
) -> Result<MiningOutput> {
    cfg.validate()?;
    let src_sents = sentences_by_doc(src)?;
    let tgt_sents = if monolingual { src_sents.clone() } else { sentences_by_doc(tgt)? };
    let mut stats = MiningStats {
        src_documents: src.len(),
        tgt_documents: tgt.len(),
        src_sentences: src_sents.values().map(Vec::len).sum(),
        tgt_sentences: tgt_sents.values().map(Vec::len).sum(),
        ..MiningStats::default()
    };
    let article_pairs = match_articles_inner(src, tgt, article_provider, cfg, monolingual)?;
    stats.article_pairs = article_pairs.len();

    // Embed every sentence of every paired document once.
    let mut row_of: HashMap<String, usize> = HashMap::new();
    let mut texts = Vec::new();
    for p in &article_pairs {
        for s in src_sents[&p.src_doc_id].iter().chain(&tgt_sents[&p.tgt_doc_id]) {
            row_of.entry(s.text.clone()).or_insert_with(|| {
                texts.push(s.text.clone());
                texts.len() - 1
            });
        }
    }
    let matrix = if texts.is_empty() { None } else { Some(sentence_provider.embed(&texts)?) };

    let per_pair: Vec<(Vec<SentencePair>, SentenceCounts)> = article_pairs
        .par_iter()
        .map(|p| {
            let (s, t) = (&src_sents[&p.src_doc_id], &tgt_sents[&p.tgt_doc_id]);
            if s.is_empty() || t.is_empty() {
                return Ok((Vec::new(), SentenceCounts::default()));
            }
            let m = matrix.as_ref().expect("sentences were embedded");
            let srows: Vec<&[f64]> = s.iter().map(|x| m.row(row_of[&x.text])).collect();
            let trows: Vec<&[f64]> = t.iter().map(|x| m.row(row_of[&x.text])).collect();
            match_sentence_rows(p, s, &srows, t, &trows, cfg)
        })
        .collect::<Result<_>>()?;

    let mut pairs = Vec::new();
    for (ps, c) in per_pair {
        stats.sentence_matches += c.matches;
        stats.rejected_length += c.rejected_length;
        stats.rejected_collision += c.rejected_collision;
        pairs.extend(ps);
    }
    if monolingual {
        pairs.retain(|p| p.src_text != p.tgt_text);
    }
    let before = pairs.len();
    let pairs = dedupe(pairs, monolingual);
    stats.duplicates_removed = before - pairs.len();
    stats.sentence_pairs = pairs.len();
    Ok(MiningOutput { article_pairs, pairs, stats })
}

/// Drops repeated text pairs, keeping the highest score (ties: earliest in
/// `(src_doc_id, src_index)` order). Monolingual mining treats pairs as
/// unordered. Output is sorted by `(src_doc_id, src_index)`.
fn dedupe(mut pairs: Vec<SentencePair>, unordered: bool) -> Vec<SentencePair> {
    pairs.sort_by(|a, b| (&a.src_doc_id, a.src_index, &a.tgt_doc_id, a.tgt_index).cmp(&(&b.src_doc_id, b.src_index, &b.tgt_doc_id, b.tgt_index)));
    let key = |p: &SentencePair| {
        if unordered && p.tgt_text < p.src_text {
            (p.tgt_text.clone(), p.src_text.clone())
        } else {
            (p.src_text.clone(), p.tgt_text.clone())
        }
    };
    let mut best: HashMap<(String, String), usize> = HashMap::new();
    for (i, p) in pairs.iter().enumerate() {
        let k = key(p);
        match best.get(&k) {
            Some(&j) if pairs[j].score >= p.score => {}
            _ => {
                best.insert(k, i);
            }
        }
    }
    let keep: HashSet<usize> = best.into_values().collect();
    pairs.into_iter().enumerate().filter(|(i, _)| keep.contains(i)).map(|(_, p)| p).collect()
}

/// Article matching, sentence matching and exact-duplicate removal.
pub fn mine_pairs(
    src: &[Document],
    tgt: &[Document],
    article_provider: &dyn EmbeddingProvider,
    sentence_provider: &dyn EmbeddingProvider,
    cfg: &MinerConfig,
) -> Result<MiningOutput> {
    mine_inner(src, tgt, article_provider, sentence_provider, cfg, false)
}

/// The same machinery within one language. A document is never matched
/// with itself, identical texts are not paired, and `(a, b)` / `(b, a)`
/// count once.
pub fn mine_paraphrases(
    mono: &[Document],
    article_provider: &dyn EmbeddingProvider,
    sentence_provider: &dyn EmbeddingProvider,
    cfg: &MinerConfig,
) -> Result<MiningOutput> {
    mine_inner(mono, mono, article_provider, sentence_provider, cfg, true)
}

pub const PAIR_HEADER: [&str; 5] = ["src_text", "tgt_text", "score", "src_doc", "tgt_doc"];
pub const ARTICLE_PAIR_HEADER: [&str; 5] = ["src_doc", "tgt_doc", "score", "src_lang", "tgt_lang"];

pub fn write_pairs_tsv<W: Write>(out: &mut W, pairs: &[SentencePair], config_hash: Option<&str>) -> Result<()> {
    tsv::write_hash_header(out, config_hash)?;
    tsv::write_record(out, &PAIR_HEADER)?;
    for p in pairs {
        let score = format!("{:.6}", p.score);
        tsv::write_record(out, &[&p.src_text, &p.tgt_text, &score, &p.src_doc_id, &p.tgt_doc_id])?;
    }
    Ok(())
}

/// `(src_text, tgt_text, score)` rows of a pair file.
pub fn read_pairs_tsv<R: BufRead>(input: R) -> Result<Vec<(String, String, f64)>> {
    tsv::read_records(input, Some(&PAIR_HEADER), PAIR_HEADER.len())?
        .into_iter()
        .map(|r| {
            let score = r[2].parse().map_err(|_| Error::Schema(format!("invalid score {:?}", r[2])))?;
            Ok((r[0].clone(), r[1].clone(), score))
        })
        .collect()
}

pub fn write_article_pairs_tsv<W: Write>(out: &mut W, pairs: &[ArticlePair], config_hash: Option<&str>) -> Result<()> {
    tsv::write_hash_header(out, config_hash)?;
    tsv::write_record(out, &ARTICLE_PAIR_HEADER)?;
    for p in pairs {
        let score = format!("{:.6}", p.score);
        tsv::write_record(out, &[&p.src_doc_id, &p.tgt_doc_id, &score, &p.src_lang, &p.tgt_lang])?;
    }
    Ok(())
}

pub fn read_article_pairs_tsv<R: BufRead>(input: R) -> Result<Vec<ArticlePair>> {
    tsv::read_records(input, Some(&ARTICLE_PAIR_HEADER), ARTICLE_PAIR_HEADER.len())?
        .into_iter()
        .map(|r| {
            let score = r[2].parse().map_err(|_| Error::Schema(format!("invalid score {:?}", r[2])))?;
            Ok(ArticlePair {
                src_doc_id: r[0].clone(),
                tgt_doc_id: r[1].clone(),
                score,
                src_lang: r[3].clone(),
                tgt_lang: r[4].clone(),
            })
        })
        .collect()
}

/// Sentence matching for already aligned article pairs.
pub fn mine_from_article_pairs(
    article_pairs: &[ArticlePair],
    src: &[Document],
    tgt: &[Document],
    provider: &dyn EmbeddingProvider,
    cfg: &MinerConfig,
) -> Result<Vec<SentencePair>> {
    let docs: BTreeMap<&str, &Document> = src.iter().chain(tgt).map(|d| (d.id.as_str(), d)).collect();
    let mut pairs = Vec::new();
    for p in article_pairs {
        let lookup = |id: &str| {
            docs.get(id).ok_or_else(|| Error::Consistency(format!("article pair refers to unknown document {id:?}")))
        };
        let s = lookup(&p.src_doc_id)?.sentence_list()?;
        let t = lookup(&p.tgt_doc_id)?.sentence_list()?;
        pairs.extend(match_sentences(p, &s, &t, provider, cfg)?);
    }
    Ok(dedupe(pairs, false))
}
