use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::SentencePair;
use crate::error::{Error, Result};
use crate::providers::{generate_adversarial, TextGenerator};
use crate::tsv;

pub const REVIEW_HEADER: [&str; 6] = ["triple_id", "anchor", "paraphrase", "adversarial", "status", "corrected_adversarial"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewStatus {
    Pending,
    Accepted,
    Corrected,
    Rejected,
}

impl ReviewStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pending => "pending",
            Self::Accepted => "accepted",
            Self::Corrected => "corrected",
            Self::Rejected => "rejected",
        }
    }
}

impl std::str::FromStr for ReviewStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pending" => Ok(Self::Pending),
            "accepted" => Ok(Self::Accepted),
            "corrected" => Ok(Self::Corrected),
            "rejected" => Ok(Self::Rejected),
            other => Err(Error::Schema(format!(
                "invalid review status {other:?}; expected pending, accepted, corrected or rejected"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParaphraseTriple {
    pub triple_id: String,
    pub anchor: String,
    pub paraphrase: String,
    pub adversarial: String,
    pub review_status: ReviewStatus,
    pub corrected_adversarial: Option<String>,
}

/// A released benchmark item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkItem {
    pub anchor: String,
    pub paraphrase: String,
    pub not_paraphrase: String,
}

/// Triples awaiting review plus the pairs for which no negative could be
/// generated, with the reason.
#[derive(Debug, Clone, Default)]
pub struct CandidateOutcome {
    pub triples: Vec<ParaphraseTriple>,
    pub dropped: Vec<(String, String)>,
}

/// One pending triple per pair. Triple ids follow the pair position, so ids
/// stay stable when some pairs are dropped.
pub fn build_benchmark_candidates(pairs: &[SentencePair], generator: &dyn TextGenerator) -> CandidateOutcome {
    let mut out = CandidateOutcome::default();
    for (i, pair) in pairs.iter().enumerate() {
        let triple_id = format!("t{i:05}");
        if pair.src_text == pair.tgt_text {
            log::warn!("{triple_id}: anchor equals paraphrase, dropped");
            out.dropped.push((triple_id, "anchor equals paraphrase".to_string()));
            continue;
        }
        match generate_adversarial(&pair.src_text, &pair.tgt_text, generator) {
            Ok(adv) if adv.text == pair.tgt_text || adv.text == pair.src_text => {
                log::warn!("{triple_id}: generated negative repeats an input, dropped");
                out.dropped.push((triple_id, "negative repeats an input".to_string()));
            }
            Ok(adv) => out.triples.push(ParaphraseTriple {
                triple_id,
                anchor: pair.src_text.clone(),
                paraphrase: pair.tgt_text.clone(),
                adversarial: adv.text,
                review_status: ReviewStatus::Pending,
                corrected_adversarial: None,
            }),
            Err(e) => {
                log::warn!("{triple_id}: {e}");
                out.dropped.push((triple_id, e.to_string()));
            }
        }
    }
    out
}

pub fn write_review_tsv<W: Write>(out: &mut W, triples: &[ParaphraseTriple], config_hash: Option<&str>) -> Result<()> {
    tsv::write_hash_header(out, config_hash)?;
    tsv::write_record(out, &REVIEW_HEADER)?;
    for t in triples {
        tsv::write_record(
            out,
            &[
                t.triple_id.as_str(),
                &t.anchor,
                &t.paraphrase,
                &t.adversarial,
                t.review_status.as_str(),
                t.corrected_adversarial.as_deref().unwrap_or(""),
            ],
        )?;
    }
    Ok(())
}

pub fn read_review_tsv<R: BufRead>(input: R) -> Result<Vec<ParaphraseTriple>> {
    tsv::read_records(input, Some(&REVIEW_HEADER), REVIEW_HEADER.len())?
        .into_iter()
        .map(|r| {
            Ok(ParaphraseTriple {
                triple_id: r[0].clone(),
                anchor: r[1].clone(),
                paraphrase: r[2].clone(),
                adversarial: r[3].clone(),
                review_status: r[4].trim().parse()?,
                corrected_adversarial: Some(r[5].clone()).filter(|s| !s.trim().is_empty()),
            })
        })
        .collect()
}

/// Accepted triples as-is, corrected ones with their corrected negative;
/// pending and rejected triples are left out.
pub fn import_review(triples: &[ParaphraseTriple]) -> Result<Vec<BenchmarkItem>> {
    let mut out = Vec::new();
    for t in triples {
        let negative = match t.review_status {
            ReviewStatus::Pending | ReviewStatus::Rejected => continue,
            ReviewStatus::Accepted => t.adversarial.clone(),
            ReviewStatus::Corrected => t.corrected_adversarial.clone().ok_or_else(|| {
                Error::Consistency(format!("{}: status corrected but no corrected_adversarial", t.triple_id))
            })?,
        };
        if t.anchor == t.paraphrase {
            return Err(Error::Consistency(format!("{}: anchor equals paraphrase", t.triple_id)));
        }
        if negative == t.paraphrase {
            return Err(Error::Consistency(format!("{}: negative equals paraphrase", t.triple_id)));
        }
        out.push(BenchmarkItem { anchor: t.anchor.clone(), paraphrase: t.paraphrase.clone(), not_paraphrase: negative });
    }
    Ok(out)
}

pub fn write_benchmark<W: Write>(out: &mut W, items: &[BenchmarkItem], config_hash: Option<&str>) -> Result<()> {
    tsv::write_jsonl(out, items, config_hash)
}

pub fn read_benchmark<R: BufRead>(input: R) -> Result<Vec<BenchmarkItem>> {
    tsv::read_jsonl(input)
}
