//! Article ingestion: cleaning, document and sentence filters, sentence
//! splitting and the JSONL corpus format.

mod clean;
mod filter;
mod split;

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::providers::LanguageIdentifier;
use crate::tsv;

pub use clean::{clean_document, clean_text};
pub use filter::{admit_document, admit_sentence, Admission, FilterPolicy, RejectReason};
pub use split::{parse_abbreviations, split_sentences, SentenceSplitter};

/// RFC 3339 / ISO-8601 timestamps stored as UTC seconds.
pub mod timestamp {
    use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn parse(s: &str) -> Option<i64> {
        let s = s.trim();
        if let Ok(t) = DateTime::parse_from_rfc3339(s) {
            return Some(t.timestamp());
        }
        for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"] {
            if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
                return Some(t.and_utc().timestamp());
            }
        }
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .ok()
            .map(|d| d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp())
    }

    pub fn format(secs: i64) -> String {
        DateTime::<Utc>::from_timestamp(secs, 0)
            .map(|t| t.format("%Y-%m-%dT%H:%M:%SZ").to_string())
            .unwrap_or_else(|| secs.to_string())
    }

    pub fn serialize<S: Serializer>(secs: &i64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(*secs))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<i64, D::Error> {
        let raw = String::deserialize(d)?;
        parse(&raw).ok_or_else(|| serde::de::Error::custom(format!("invalid timestamp {raw:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub index: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub lang: String,
    /// UTC seconds.
    #[serde(with = "timestamp")]
    pub published_at: i64,
    #[serde(default)]
    pub title: Option<String>,
    pub body: String,
    /// Admitted sentences as character spans into `body`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentences: Option<Vec<SentenceSpan>>,
}

impl Document {
    pub fn new(id: impl Into<String>, lang: impl Into<String>, published_at: i64, body: impl Into<String>) -> Self {
        Self { id: id.into(), lang: lang.into(), published_at, title: None, body: body.into(), sentences: None }
    }

    /// Materializes the stored sentence spans.
    pub fn sentence_list(&self) -> Result<Vec<Sentence>> {
        let Some(spans) = &self.sentences else {
            return Ok(Vec::new());
        };
        let chars: Vec<char> = self.body.chars().collect();
        spans
            .iter()
            .map(|s| {
                if s.start >= s.end || s.end > chars.len() {
                    return Err(Error::Schema(format!("document {}: span {}..{} out of range", self.id, s.start, s.end)));
                }
                Ok(Sentence {
                    doc_id: self.id.clone(),
                    index: s.index,
                    start: s.start,
                    end: s.end,
                    text: chars[s.start..s.end].iter().collect(),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub doc_id: String,
    pub index: usize,
    /// Character offsets into the cleaned body.
    pub start: usize,
    pub end: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub id: String,
    pub stage: String,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub documents_in: usize,
    pub documents_accepted: usize,
    pub sentences_split: usize,
    pub sentences_accepted: usize,
    pub rejections: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default)]
pub struct PreparedCorpus {
    /// Accepted documents ordered by `(published_at, id)`, each carrying its
    /// admitted sentences.
    pub documents: Vec<Document>,
    pub rejections: Vec<Rejection>,
    pub stats: CorpusStats,
}

fn prepare_one(
    raw: &Document,
    policy: &FilterPolicy,
    lang_id: &dyn LanguageIdentifier,
) -> (Option<Document>, Vec<Rejection>, usize) {
    let reject = |id: &str, stage: &str, reason| Rejection { id: id.to_string(), stage: stage.to_string(), reason };
    let mut doc = match clean_document(raw) {
        Ok(d) => d,
        Err(_) => return (None, vec![reject(&raw.id, "clean", RejectReason::EmptyAfterCleaning)], 0),
    };
    if let Admission::Reject(reason) = admit_document(&doc, policy, lang_id) {
        return (None, vec![reject(&doc.id, "document", reason)], 0);
    }
    let sentences = split_sentences(&doc, &doc.lang);
    let split = sentences.len();
    let mut rejections = Vec::new();
    let mut spans = Vec::new();
    for s in sentences {
        match admit_sentence(&s, &doc.lang, policy, lang_id) {
            Admission::Accept => spans.push(SentenceSpan { index: s.index, start: s.start, end: s.end }),
            Admission::Reject(reason) => rejections.push(reject(&format!("{}#{}", doc.id, s.index), "sentence", reason)),
        }
    }
    doc.sentences = Some(spans);
    (Some(doc), rejections, split)
}

/// Cleans, filters and splits every document. Documents are processed in
/// parallel; output order is `(published_at, id)` regardless of input order.
pub fn prepare_corpus(
    raw: &[Document],
    policy: &FilterPolicy,
    lang_id: &dyn LanguageIdentifier,
) -> Result<PreparedCorpus> {
    let mut seen = HashSet::new();
    if let Some(dup) = raw.iter().find(|d| !seen.insert(d.id.as_str())) {
        return Err(Error::Schema(format!("duplicate document id {:?}", dup.id)));
    }
    let results: Vec<_> = raw.par_iter().map(|d| prepare_one(d, policy, lang_id)).collect();
    let mut out = PreparedCorpus::default();
    out.stats.documents_in = raw.len();
    for (doc, rejections, split) in results {
        out.stats.sentences_split += split;
        if let Some(doc) = doc {
            out.stats.sentences_accepted += doc.sentences.as_ref().map_or(0, Vec::len);
            out.documents.push(doc);
        }
        out.rejections.extend(rejections);
    }
    out.documents.sort_by(|a, b| (a.published_at, &a.id).cmp(&(b.published_at, &b.id)));
    out.rejections.sort_by(|a, b| (&a.id, &a.stage).cmp(&(&b.id, &b.stage)));
    out.stats.documents_accepted = out.documents.len();
    for r in &out.rejections {
        *out.stats.rejections.entry(format!("{}:{}", r.stage, r.reason)).or_default() += 1;
    }
    Ok(out)
}

pub fn read_documents<R: BufRead>(input: R) -> Result<Vec<Document>> {
    tsv::read_jsonl(input)
}

pub fn write_documents<W: Write>(out: &mut W, docs: &[Document], config_hash: Option<&str>) -> Result<()> {
    tsv::write_jsonl(out, docs, config_hash)
}

pub const REJECTION_HEADER: [&str; 3] = ["id", "stage", "reason"];

pub fn write_rejections<W: Write>(out: &mut W, rejections: &[Rejection], config_hash: Option<&str>) -> Result<()> {
    tsv::write_hash_header(out, config_hash)?;
    tsv::write_record(out, &REJECTION_HEADER)?;
    for r in rejections {
        tsv::write_record(out, &[r.id.as_str(), r.stage.as_str(), r.reason.as_str()])?;
    }
    Ok(())
}
