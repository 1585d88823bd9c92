//! Bitext mining, zero-shot classification, paraphrase detection and
//! cross-lingual transfer evaluations.

mod bitext;
mod classifier;
mod datasets;
mod paraphrase;
mod transfer;
mod zsc;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bitext::{bitext_accuracy, bitext_accuracy_named, bitext_eval, merge_bitext_reports, retrieval_accuracy};
pub use classifier::{
    cross_entropy, train_linear_classifier, train_linear_classifier_on_features, ClassifierConfig, ClassifierOutcome,
    LinearClassifier,
};
pub use datasets::{
    check_sib_shape, read_label_names, read_labeled_tsv, LabeledDataset, Split, SIB200_SHAPE,
};
pub use paraphrase::paraphrase_eval;
pub use transfer::{transfer_eval, SourceData, DEFAULT_EXCLUDED_SOURCES};
pub use zsc::{zsc_eval, TemplateSet, LB_LABELS, LABEL_PLACEHOLDER};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub metric: String,
    /// Values the mean is taken over.
    pub breakdown: BTreeMap<String, f64>,
    pub mean: f64,
    /// Computed but left out of the mean.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub excluded: BTreeMap<String, f64>,
    /// Finer-grained values (per seed and similar), informational.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, f64>,
    #[serde(default)]
    pub config: serde_json::Value,
    #[serde(default)]
    pub provider: String,
}

impl EvalReport {
    /// Report over `breakdown` with the mean filled in.
    pub fn new(task: &str, breakdown: BTreeMap<String, f64>) -> Result<Self> {
        if breakdown.is_empty() {
            return Err(Error::DegenerateInput(format!("{task}: empty breakdown")));
        }
        let mean = breakdown.values().sum::<f64>() / breakdown.len() as f64;
        Ok(Self {
            task: task.to_string(),
            metric: "accuracy".to_string(),
            breakdown,
            mean,
            excluded: BTreeMap::new(),
            details: BTreeMap::new(),
            config: serde_json::Value::Null,
            provider: String::new(),
        })
    }

    pub fn with_provider(mut self, provider: impl Into<String>) -> Self {
        self.provider = provider.into();
        self
    }

    pub fn with_config(mut self, config: serde_json::Value) -> Self {
        self.config = config;
        self
    }

    /// JSON object with a leading `config_hash` field when given.
    pub fn to_json(&self, config_hash: Option<&str>) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        if let (Some(h), Some(obj)) = (config_hash, value.as_object_mut()) {
            let mut with_hash = serde_json::Map::new();
            with_hash.insert("config_hash".to_string(), serde_json::Value::String(h.to_string()));
            with_hash.extend(std::mem::take(obj));
            value = serde_json::Value::Object(with_hash);
        }
        Ok(serde_json::to_string_pretty(&value)?)
    }

    pub fn write_json<W: Write>(&self, out: &mut W, config_hash: Option<&str>) -> Result<()> {
        writeln!(out, "{}", self.to_json(config_hash)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_of_breakdown() {
        let b: BTreeMap<String, f64> = [("a".to_string(), 0.5), ("b".to_string(), 1.0)].into();
        let r = EvalReport::new("t", b).unwrap();
        assert_eq!(r.mean, 0.75);
        let json = r.to_json(Some("abc")).unwrap();
        assert!(json.trim_start().starts_with("{\n  \"config_hash\": \"abc\""));
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        assert!(EvalReport::new("t", BTreeMap::new()).is_err());
    }
}
