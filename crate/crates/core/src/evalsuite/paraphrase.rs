use std::collections::BTreeMap;

use super::EvalReport;
use crate::embed::cosine_slices;
use crate::error::{Error, Result};
use crate::miner::BenchmarkItem;
use crate::providers::{embed_unique, EmbeddingProvider};

/// Accuracy of picking the paraphrase over the adversarial candidate by
/// cosine to the anchor. An exact tie counts as wrong.
pub fn paraphrase_eval(benchmark: &[BenchmarkItem], provider: &dyn EmbeddingProvider) -> Result<EvalReport> {
    if benchmark.is_empty() {
        return Err(Error::DegenerateInput("benchmark is empty".to_string()));
    }
    let collect = |f: fn(&BenchmarkItem) -> &String| benchmark.iter().map(|b| f(b).clone()).collect::<Vec<String>>();
    let anchors = embed_unique(provider, &collect(|b| &b.anchor))?;
    let paras = embed_unique(provider, &collect(|b| &b.paraphrase))?;
    let negs = embed_unique(provider, &collect(|b| &b.not_paraphrase))?;
    let mut correct = 0usize;
    for i in 0..benchmark.len() {
        let pos = cosine_slices(anchors.row(i), paras.row(i))?;
        let neg = cosine_slices(anchors.row(i), negs.row(i))?;
        correct += usize::from(pos > neg);
    }
    let accuracy = correct as f64 / benchmark.len() as f64;
    let mut report = EvalReport::new("paraphrase", BTreeMap::from([("lb".to_string(), accuracy)]))?
        .with_provider(provider.model_id());
    report.details.insert("correct".to_string(), correct as f64);
    report.details.insert("total".to_string(), benchmark.len() as f64);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{MockEmbedder, MockSpec};
    use std::collections::HashMap;

    fn items() -> Vec<BenchmarkItem> {
        (0..10)
            .map(|i| BenchmarkItem {
                anchor: format!("anchor {i}"),
                paraphrase: format!("para {i}"),
                not_paraphrase: format!("adv {i}"),
            })
            .collect()
    }

    fn mock(items: &[BenchmarkItem], tie: bool) -> MockEmbedder {
        let mut concepts = HashMap::new();
        for (i, it) in items.iter().enumerate() {
            concepts.insert(it.anchor.clone(), format!("c{i}"));
            concepts.insert(it.paraphrase.clone(), format!("c{i}"));
            let adv = if tie { format!("c{i}") } else { format!("d{i}") };
            concepts.insert(it.not_paraphrase.clone(), adv);
        }
        MockEmbedder::new(MockSpec::new(64, if tie { 0.0 } else { 0.1 }).with_concepts(concepts)).unwrap()
    }

    #[test]
    fn planted_and_swapped() {
        let b = items();
        let m = mock(&b, false);
        assert_eq!(paraphrase_eval(&b, &m).unwrap().mean, 1.0);
        let swapped: Vec<BenchmarkItem> = b
            .iter()
            .map(|it| BenchmarkItem {
                anchor: it.anchor.clone(),
                paraphrase: it.not_paraphrase.clone(),
                not_paraphrase: it.paraphrase.clone(),
            })
            .collect();
        assert_eq!(paraphrase_eval(&swapped, &m).unwrap().mean, 0.0);
    }

    #[test]
    fn ties_are_wrong() {
        let b = items();
        let r = paraphrase_eval(&b, &mock(&b, true)).unwrap();
        assert_eq!(r.mean, 0.0);
        assert_eq!(r.details["correct"] + (r.details["total"] - r.details["correct"]), 10.0);
    }
}
