use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use bitextkit_core::adapt::{train_adapter, write_train_log_csv, AdaptedProvider, Adapter};
use bitextkit_core::alignkit::{
    alignment_matrix, check_flores_rows, compare_alignment, read_alignment_csv, AlignmentReport,
};
use bitextkit_core::corpus::{prepare_corpus, read_documents, write_documents, write_rejections, Document};
use bitextkit_core::evalsuite::{
    bitext_eval, merge_bitext_reports, paraphrase_eval, read_label_names, read_labeled_tsv, transfer_eval, zsc_eval,
    EvalReport, SourceData, Split, TemplateSet, LB_LABELS,
};
use bitextkit_core::miner::{
    build_benchmark_candidates, import_review, match_articles, mine_from_article_pairs, mine_pairs, mine_paraphrases,
    read_article_pairs_tsv, read_benchmark, read_pairs_tsv, read_review_tsv, write_article_pairs_tsv, write_benchmark,
    write_pairs_tsv, write_review_tsv, ReviewStatus, SentencePair,
};
use bitextkit_core::providers::{
    embed_unique, read_concept_tsv, EmbeddingProvider, HttpEmbedder, HttpGenerator, LanguageProfiles, MockEmbedder,
    MockSpec, OfflineTransform, ProviderKind, TextGenerator, VectorStore,
};
use bitextkit_core::{EmbeddingMatrix, Error, Result};

use crate::config::{GeneratorKind, RunConfig, StageProvider};

pub struct Context {
    pub cfg: RunConfig,
    pub hash: String,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// `out/x.tsv` -> `out/x.<suffix>`
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

fn read_docs(path: &Path) -> Result<Vec<Document>> {
    read_documents(open(path)?)
}

fn pair_texts(path: &Path) -> Result<Vec<(String, String)>> {
    Ok(read_pairs_tsv(open(path)?)?.into_iter().map(|(s, t, _)| (s, t)).collect())
}

fn lang_pair(spec: &str) -> Option<(String, String)> {
    let (a, b) = spec.split_once('-')?;
    (!a.is_empty() && !b.is_empty()).then(|| (a.to_string(), b.to_string()))
}

fn lang_file(spec: &str) -> Result<(String, PathBuf)> {
    match spec.split_once('=') {
        Some((l, f)) if !l.is_empty() && !f.is_empty() => Ok((l.to_string(), PathBuf::from(f))),
        _ => Err(Error::InvalidConfig(format!("expected LANG=FILE, got {spec:?}"))),
    }
}

impl Context {
    pub fn new(cfg: RunConfig) -> Self {
        let hash = cfg.hash();
        Self { cfg, hash }
    }

    fn h(&self) -> Option<&str> {
        Some(&self.hash)
    }

    fn write_stats(&self, output: &Path, command: &str, body: Value) -> Result<()> {
        let mut doc = Map::new();
        doc.insert("config_hash".into(), json!(self.hash));
        doc.insert("command".into(), json!(command));
        if let Value::Object(fields) = body {
            doc.extend(fields);
        }
        let path = sibling(output, "stats.json");
        let mut out = create(&path)?;
        serde_json::to_writer_pretty(&mut out, &Value::Object(doc))?;
        writeln!(out)?;
        out.flush()?;
        Ok(())
    }

    fn provider(&self, stage: &StageProvider) -> Result<Box<dyn EmbeddingProvider>> {
        Ok(match stage.kind {
            ProviderKind::Mock => {
                let mut spec = MockSpec::new(stage.dimension, stage.noise_scale);
                if let Some(path) = &stage.concept_map {
                    spec = spec.with_concepts(read_concept_tsv(open(&self.cfg.resolve(path))?)?);
                }
                Box::new(MockEmbedder::new(spec)?)
            }
            ProviderKind::File => {
                let path = stage.vectors.as_ref().expect("validated");
                Box::new(VectorStore::load(&self.cfg.resolve(path))?)
            }
            ProviderKind::Http => {
                let mut http = stage.http.clone();
                http.cache_dir = self.cfg.resolve(&http.cache_dir);
                Box::new(HttpEmbedder::from_config(http)?)
            }
        })
    }

    /// The eval-stage provider, behind the adapter when one is given.
    fn eval_provider(&self, adapter: Option<&Path>) -> Result<Box<dyn EmbeddingProvider>> {
        let base = self.provider(&self.cfg.providers.eval)?;
        Ok(match adapter {
            Some(path) => {
                let (adapter, _) = Adapter::load(path)?;
                Box::new(AdaptedProvider::new(base, adapter))
            }
            None => base,
        })
    }

    fn language_identifier(&self) -> Result<LanguageProfiles> {
        let langs: Vec<&str> = self.cfg.corpus.languages.iter().map(String::as_str).collect();
        match &self.cfg.corpus.langid_seed_dir {
            None => LanguageProfiles::builtin_for(&langs),
            Some(dir) => {
                let dir = self.cfg.resolve(dir);
                let mut seeds = Vec::new();
                for lang in &langs {
                    seeds.push((*lang, std::fs::read_to_string(dir.join(format!("{lang}.txt")))?));
                }
                Ok(LanguageProfiles::train(seeds.iter().map(|(l, t)| (*l, t.as_str()))))
            }
        }
    }

    fn generator(&self) -> Box<dyn TextGenerator> {
        let g = &self.cfg.generator;
        match g.kind {
            GeneratorKind::Offline => Box::new(OfflineTransform { lang: g.lang.clone() }),
            GeneratorKind::Http => Box::new(HttpGenerator::new(g.endpoint_url.clone(), g.model_id.clone())),
        }
    }

    pub fn ingest(&self, input: &Path, output: &Path) -> Result<()> {
        let raw = read_docs(input)?;
        let lid = self.language_identifier()?;
        let prepared = prepare_corpus(&raw, &self.cfg.corpus.filter(), &lid)?;
        let mut out = create(output)?;
        write_documents(&mut out, &prepared.documents, self.h())?;
        out.flush()?;
        let mut rej = create(&sibling(output, "rejections.tsv"))?;
        write_rejections(&mut rej, &prepared.rejections, self.h())?;
        rej.flush()?;
        log::info!(
            "ingest: {} of {} documents accepted, {} sentences",
            prepared.stats.documents_accepted,
            prepared.stats.documents_in,
            prepared.stats.sentences_accepted
        );
        self.write_stats(output, "ingest", serde_json::to_value(&prepared.stats)?)
    }

    pub fn match_articles(&self, src: &Path, tgt: &Path, output: &Path) -> Result<()> {
        let (s, t) = (read_docs(src)?, read_docs(tgt)?);
        let provider = self.provider(&self.cfg.providers.article)?;
        let pairs = match_articles(&s, &t, &provider, &self.cfg.miner)?;
        let mut out = create(output)?;
        write_article_pairs_tsv(&mut out, &pairs, self.h())?;
        out.flush()?;
        log::info!("match-articles: {} pairs", pairs.len());
        self.write_stats(
            output,
            "match-articles",
            json!({"src_documents": s.len(), "tgt_documents": t.len(), "article_pairs": pairs.len()}),
        )
    }

    pub fn mine_sentences(&self, src: &Path, tgt: &Path, articles: Option<&Path>, output: &Path) -> Result<()> {
        let (s, t) = (read_docs(src)?, read_docs(tgt)?);
        let sentence = self.provider(&self.cfg.providers.sentence)?;
        let (pairs, stats) = match articles {
            Some(path) => {
                let article_pairs = read_article_pairs_tsv(open(path)?)?;
                self.cfg.miner.validate()?;
                let pairs = mine_from_article_pairs(&article_pairs, &s, &t, &sentence, &self.cfg.miner)?;
                let stats = json!({"article_pairs": article_pairs.len(), "sentence_pairs": pairs.len()});
                (pairs, stats)
            }
            None => {
                let article = self.provider(&self.cfg.providers.article)?;
                let mined = mine_pairs(&s, &t, &article, &sentence, &self.cfg.miner)?;
                (mined.pairs, serde_json::to_value(&mined.stats)?)
            }
        };
        let mut out = create(output)?;
        write_pairs_tsv(&mut out, &pairs, self.h())?;
        out.flush()?;
        log::info!("mine-sentences: {} pairs", pairs.len());
        self.write_stats(output, "mine-sentences", stats)
    }

    pub fn mine_paraphrases(&self, input: &Path, output: &Path) -> Result<()> {
        let docs = read_docs(input)?;
        let article = self.provider(&self.cfg.providers.article)?;
        let sentence = self.provider(&self.cfg.providers.sentence)?;
        let mined = mine_paraphrases(&docs, &article, &sentence, &self.cfg.miner)?;
        let mut out = create(output)?;
        write_pairs_tsv(&mut out, &mined.pairs, self.h())?;
        out.flush()?;
        log::info!("mine-paraphrases: {} pairs", mined.pairs.len());
        self.write_stats(output, "mine-paraphrases", serde_json::to_value(&mined.stats)?)
    }

    pub fn build_benchmark(&self, pairs: &Path, output: &Path) -> Result<()> {
        let pairs: Vec<SentencePair> = read_pairs_tsv(open(pairs)?)?
            .into_iter()
            .map(|(src_text, tgt_text, score)| SentencePair {
                src_text,
                tgt_text,
                score,
                src_lang: String::new(),
                tgt_lang: String::new(),
                src_doc_id: String::new(),
                tgt_doc_id: String::new(),
                src_index: 0,
                tgt_index: 0,
            })
            .collect();
        let outcome = build_benchmark_candidates(&pairs, self.generator().as_ref());
        let mut out = create(output)?;
        write_review_tsv(&mut out, &outcome.triples, self.h())?;
        out.flush()?;
        log::info!("build-benchmark: {} triples, {} dropped", outcome.triples.len(), outcome.dropped.len());
        let dropped: Map<String, Value> = outcome.dropped.iter().map(|(id, why)| (id.clone(), json!(why))).collect();
        self.write_stats(
            output,
            "build-benchmark",
            json!({"pairs": pairs.len(), "triples": outcome.triples.len(), "dropped": dropped}),
        )
    }

    pub fn review_import(&self, input: &Path, output: &Path, accept_pending: bool) -> Result<()> {
        let mut triples = read_review_tsv(open(input)?)?;
        if accept_pending {
            for t in triples.iter_mut().filter(|t| t.review_status == ReviewStatus::Pending) {
                t.review_status = ReviewStatus::Accepted;
            }
        }
        let items = import_review(&triples)?;
        let mut out = create(output)?;
        write_benchmark(&mut out, &items, self.h())?;
        out.flush()?;
        log::info!("review-import: {} of {} triples kept", items.len(), triples.len());
        self.write_stats(output, "review-import", json!({"triples": triples.len(), "items": items.len()}))
    }

    pub fn train_adapter(&self, pair_files: &[PathBuf], output: &Path) -> Result<()> {
        let mut positives = Vec::new();
        for path in pair_files {
            for (src_text, tgt_text) in pair_texts(path)? {
                positives.push(SentencePair {
                    src_text,
                    tgt_text,
                    score: 1.0,
                    src_lang: String::new(),
                    tgt_lang: String::new(),
                    src_doc_id: String::new(),
                    tgt_doc_id: String::new(),
                    src_index: 0,
                    tgt_index: 0,
                });
            }
        }
        let provider = self.provider(&self.cfg.providers.eval)?;
        let outcome = train_adapter(&positives, &provider, &self.cfg.train, &self.cfg.loss)?;
        let mut out = create(output)?;
        out.write_all(outcome.adapter.to_checkpoint_json(&self.cfg.train, self.h())?.as_bytes())?;
        out.flush()?;
        let mut log_out = create(&sibling(output, "log.csv"))?;
        write_train_log_csv(&mut log_out, &outcome.log, self.h())?;
        log_out.flush()?;
        log::info!(
            "train-adapter: dev loss {:.6} -> {:.6} (best step {})",
            outcome.initial_dev_loss,
            outcome.best_dev_loss,
            outcome.best_step
        );
        self.write_stats(
            output,
            "train-adapter",
            json!({
                "train_pairs": outcome.train_pairs,
                "dev_pairs": outcome.dev_pairs,
                "initial_dev_loss": outcome.initial_dev_loss,
                "best_dev_loss": outcome.best_dev_loss,
                "best_step": outcome.best_step,
                "log_entries": outcome.log.len(),
            }),
        )
    }

    fn write_report(&self, report: &EvalReport, output: &Path, command: &str) -> Result<()> {
        let mut out = create(output)?;
        report.write_json(&mut out, self.h())?;
        out.flush()?;
        log::info!("{command}: mean {:.4}", report.mean);
        self.write_stats(output, command, json!({"mean": report.mean, "breakdown": report.breakdown}))
    }

    pub fn eval_bitext(&self, pair_files: &[PathBuf], langs: &[String], adapter: Option<&Path>, output: &Path) -> Result<()> {
        if !langs.is_empty() && langs.len() != pair_files.len() {
            return Err(Error::InvalidConfig(format!(
                "--langs given {} times for {} pair files",
                langs.len(),
                pair_files.len()
            )));
        }
        let provider = self.eval_provider(adapter)?;
        let mut reports = Vec::new();
        for (i, path) in pair_files.iter().enumerate() {
            let spec = match langs.get(i) {
                Some(l) => l.clone(),
                None => path
                    .file_name()
                    .and_then(|n| n.to_str())
                    .and_then(|n| n.split('.').next())
                    .unwrap_or_default()
                    .to_string(),
            };
            let (src, tgt) = lang_pair(&spec).ok_or_else(|| {
                Error::InvalidConfig(format!("cannot derive SRC-TGT from {spec:?}; pass --langs"))
            })?;
            reports.push(bitext_eval(&pair_texts(path)?, &provider, &src, &tgt)?);
        }
        let report = merge_bitext_reports(&reports)?.with_provider(provider.model_id());
        self.write_report(&report, output, "eval-bitext")
    }

    pub fn eval_zsc(
        &self,
        data: &Path,
        labels: Option<&Path>,
        templates: Option<&Path>,
        adapter: Option<&Path>,
        output: &Path,
    ) -> Result<()> {
        let labels = match labels {
            Some(p) => read_label_names(p)?,
            None => LB_LABELS.iter().map(|s| s.to_string()).collect(),
        };
        let templates = match templates {
            Some(p) => TemplateSet::parse(&std::fs::read_to_string(p)?)?,
            None => TemplateSet::luxembourgish(),
        };
        let data = read_labeled_tsv(data, Split::Test, &labels)?;
        let provider = self.eval_provider(adapter)?;
        let report = zsc_eval(&data.items, &labels, &templates, &provider)?;
        self.write_report(&report, output, "eval-zsc")
    }

    pub fn eval_paraphrase(&self, benchmark: &Path, adapter: Option<&Path>, output: &Path) -> Result<()> {
        let items = read_benchmark(open(benchmark)?)?;
        let provider = self.eval_provider(adapter)?;
        let report = paraphrase_eval(&items, &provider)?;
        self.write_report(&report, output, "eval-paraphrase")
    }

    pub fn eval_transfer(
        &self,
        dir: &Path,
        sources: &[String],
        target: &str,
        exclude: &[String],
        adapter: Option<&Path>,
        output: &Path,
    ) -> Result<()> {
        let labels = read_label_names(&dir.join("labels.txt"))?;
        let mut data = Vec::new();
        for lang in sources {
            data.push(SourceData {
                lang: lang.clone(),
                train: read_labeled_tsv(&dir.join(format!("{lang}.train.tsv")), Split::Train, &labels)?,
                dev: read_labeled_tsv(&dir.join(format!("{lang}.dev.tsv")), Split::Dev, &labels)?,
            });
        }
        let test = read_labeled_tsv(&dir.join(format!("{target}.test.tsv")), Split::Test, &labels)?;
        let provider = self.eval_provider(adapter)?;
        let exclude: Vec<&str> = exclude.iter().map(String::as_str).collect();
        let report = transfer_eval(&data, &test, &provider, &self.cfg.classifier, &exclude)?;
        self.write_report(&report, output, "eval-transfer")
    }

    pub fn cka(&self, embeddings: &[String], texts: &[String], adapter: Option<&Path>, output: &Path) -> Result<()> {
        let mut corpora: Vec<(String, EmbeddingMatrix)> = Vec::new();
        if !embeddings.is_empty() {
            let adapter = adapter.map(Adapter::load).transpose()?.map(|(a, _)| a);
            for spec in embeddings {
                let (lang, path) = lang_file(spec)?;
                let m = VectorStore::load(&path)?.matrix()?;
                let m = match &adapter {
                    Some(a) => a.apply_matrix(&m)?,
                    None => m,
                };
                corpora.push((lang, m));
            }
        } else if !texts.is_empty() {
            let provider = self.eval_provider(adapter)?;
            for spec in texts {
                let (lang, path) = lang_file(spec)?;
                let lines: Vec<String> =
                    std::fs::read_to_string(&path)?.lines().filter(|l| !l.trim().is_empty()).map(String::from).collect();
                corpora.push((lang, embed_unique(&provider, &lines)?));
            }
        } else {
            return Err(Error::InvalidConfig("cka needs --embeddings or --texts".to_string()));
        }
        if self.cfg.cka.flores {
            check_flores_rows(&corpora)?;
        }
        let mut report = alignment_matrix(&corpora, self.cfg.cka.variant)?;
        let groups = &self.cfg.groups;
        if groups.hr.iter().chain(&groups.lr).all(|l| report.languages.contains(l)) {
            report = report.with_groups(groups)?;
        } else {
            log::warn!("cka: not every group language is present, group means skipped");
        }
        let mut out = create(output)?;
        report.write_csv(&mut out, self.h())?;
        out.flush()?;
        self.write_json_with_hash(&sibling(output, "json"), &report)?;
        self.write_stats(
            output,
            "cka",
            json!({"variant": report.variant, "languages": report.languages, "rows": corpora[0].1.nrows(), "groups": report.groups}),
        )
    }

    fn write_json_with_hash<T: serde::Serialize>(&self, path: &Path, value: &T) -> Result<()> {
        let mut doc = Map::new();
        doc.insert("config_hash".into(), json!(self.hash));
        if let Value::Object(fields) = serde_json::to_value(value)? {
            doc.extend(fields);
        }
        let mut out = create(path)?;
        serde_json::to_writer_pretty(&mut out, &Value::Object(doc))?;
        writeln!(out)?;
        out.flush()?;
        Ok(())
    }

    fn read_report(&self, path: &Path) -> Result<AlignmentReport> {
        let report = read_alignment_csv(open(path)?, self.cfg.cka.variant)?;
        let groups = &self.cfg.groups;
        if groups.hr.iter().chain(&groups.lr).all(|l| report.languages.contains(l)) {
            report.with_groups(groups)
        } else {
            Ok(report)
        }
    }

    pub fn cka_compare(&self, before: &Path, after: &Path, output: &Path) -> Result<()> {
        let delta = compare_alignment(&self.read_report(before)?, &self.read_report(after)?)?;
        self.write_json_with_hash(output, &delta)?;
        log::info!("cka-compare: {} increased, {} decreased, {} unchanged", delta.increased, delta.decreased, delta.unchanged);
        self.write_stats(
            output,
            "cka-compare",
            json!({"increased": delta.increased, "decreased": delta.decreased, "unchanged": delta.unchanged}),
        )
    }
}
