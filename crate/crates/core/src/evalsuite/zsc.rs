use std::collections::BTreeMap;

use serde_json::json;

use super::EvalReport;
use crate::embed::cosine_slices;
use crate::error::{Error, Result};
use crate::providers::{embed_unique, EmbeddingProvider};

pub const LABEL_PLACEHOLDER: &str = "[LABEL]";

/// The seven Luxembourgish topic labels, in label-index order.
pub const LB_LABELS: [&str; 7] = ["Technologie", "Reesen", "Politik", "Gesondheet", "Ennerhalung", "Geographie", "Sport"];

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    templates: Vec<String>,
}

impl TemplateSet {
    pub fn new(templates: Vec<String>) -> Result<Self> {
        if templates.is_empty() {
            return Err(Error::DegenerateInput("template set is empty".to_string()));
        }
        if let Some(bad) = templates.iter().find(|t| t.matches(LABEL_PLACEHOLDER).count() != 1) {
            return Err(Error::MalformedTemplate(bad.clone()));
        }
        Ok(Self { templates })
    }

    /// One template per nonempty line.
    pub fn parse(text: &str) -> Result<Self> {
        Self::new(text.lines().map(str::trim_end).filter(|l| !l.trim().is_empty()).map(String::from).collect())
    }

    /// The five shipped Luxembourgish templates; the first is the bare
    /// placeholder.
    pub fn luxembourgish() -> Self {
        Self::parse(include_str!("../../data/zsc/templates_lb.txt")).expect("shipped templates are well formed")
    }

    pub fn templates(&self) -> &[String] {
        &self.templates
    }

    pub fn fill(&self, template: usize, label: &str) -> String {
        self.templates[template].replacen(LABEL_PLACEHOLDER, label, 1)
    }
}

/// For each template, embeds the filled labels and predicts each document's
/// label as the most similar one (ties to the lowest label index).
/// Breakdown keys are `template_1`, `template_2`, ...
pub fn zsc_eval(
    docs: &[(String, usize)],
    labels: &[String],
    templates: &TemplateSet,
    provider: &dyn EmbeddingProvider,
) -> Result<EvalReport> {
    if labels.is_empty() {
        return Err(Error::DegenerateInput("label set is empty".to_string()));
    }
    if docs.is_empty() {
        return Err(Error::DegenerateInput("no documents to classify".to_string()));
    }
    if let Some((_, bad)) = docs.iter().find(|(_, l)| *l >= labels.len()) {
        return Err(Error::Schema(format!("label index {bad} out of range for {} labels", labels.len())));
    }
    let texts: Vec<String> = docs.iter().map(|(t, _)| t.clone()).collect();
    let doc_rows = embed_unique(provider, &texts)?;
    let mut breakdown = BTreeMap::new();
    for t in 0..templates.templates().len() {
        let filled: Vec<String> = labels.iter().map(|l| templates.fill(t, l)).collect();
        let label_rows = embed_unique(provider, &filled)?;
        let mut correct = 0usize;
        for (i, (_, gold)) in docs.iter().enumerate() {
            let mut best = (0usize, f64::NEG_INFINITY);
            for (k, row) in label_rows.rows().enumerate() {
                let s = cosine_slices(doc_rows.row(i), row)?;
                if s > best.1 {
                    best = (k, s);
                }
            }
            correct += usize::from(best.0 == *gold);
        }
        breakdown.insert(format!("template_{}", t + 1), correct as f64 / docs.len() as f64);
    }
    Ok(EvalReport::new("zsc", breakdown)?
        .with_provider(provider.model_id())
        .with_config(json!({"templates": templates.templates(), "labels": labels})))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{MockEmbedder, MockSpec};
    use std::collections::HashMap;

    fn labels() -> Vec<String> {
        LB_LABELS.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn shipped_templates() {
        let t = TemplateSet::luxembourgish();
        assert_eq!(t.templates().len(), 5);
        assert_eq!(t.templates()[0], "[LABEL]");
        assert_eq!(t.fill(1, "Sport"), "An dësem Beispill geet et em Sport.");
    }

    #[test]
    fn malformed_templates() {
        assert!(matches!(TemplateSet::new(vec!["no label".into()]), Err(Error::MalformedTemplate(_))));
        assert!(matches!(TemplateSet::new(vec!["[LABEL] [LABEL]".into()]), Err(Error::MalformedTemplate(_))));
    }

    fn planted(docs: &[(String, usize)], target: impl Fn(usize) -> usize) -> MockEmbedder {
        let templates = TemplateSet::luxembourgish();
        let mut concepts = HashMap::new();
        for (k, l) in LB_LABELS.iter().enumerate() {
            for t in 0..5 {
                concepts.insert(templates.fill(t, l), format!("label{k}"));
            }
        }
        for (text, gold) in docs {
            concepts.insert(text.clone(), format!("label{}", target(*gold)));
        }
        MockEmbedder::new(MockSpec::new(128, 0.0).with_concepts(concepts)).unwrap()
    }

    fn docs() -> Vec<(String, usize)> {
        (0..35).map(|i| (format!("Dokument {i}"), (i * 3) % 7)).collect()
    }

    #[test]
    fn planted_alignment_is_perfect() {
        let d = docs();
        let r = zsc_eval(&d, &labels(), &TemplateSet::luxembourgish(), &planted(&d, |g| g)).unwrap();
        assert_eq!(r.breakdown.len(), 5);
        assert!(r.breakdown.values().all(|&v| v == 1.0));
    }

    #[test]
    fn everything_predicted_as_label_zero() {
        let d = docs();
        let r = zsc_eval(&d, &labels(), &TemplateSet::luxembourgish(), &planted(&d, |_| 0)).unwrap();
        let freq = d.iter().filter(|(_, g)| *g == 0).count() as f64 / d.len() as f64;
        assert!(r.breakdown.values().all(|&v| v == freq));
    }
}
