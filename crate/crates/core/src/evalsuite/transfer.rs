use std::collections::BTreeMap;

use rayon::prelude::*;
use serde_json::json;

use super::{train_linear_classifier_on_features, ClassifierConfig, EvalReport, LabeledDataset};
use crate::error::{Error, Result};
use crate::providers::{embed_unique, EmbeddingProvider};

/// Source languages that are trained and reported but kept out of the mean.
pub const DEFAULT_EXCLUDED_SOURCES: [&str; 1] = ["lb"];

#[derive(Debug, Clone)]
pub struct SourceData {
    pub lang: String,
    pub train: LabeledDataset,
    pub dev: LabeledDataset,
}

/// Trains one classifier per source language and seed, scores each on the
/// target test split and averages over seeds. The report mean runs over the
/// source languages not listed in `excluded`; those land in
/// `report.excluded`. Per-seed accuracies go to `details` as `"{lang}/seed{s}"`.
pub fn transfer_eval(
    sources: &[SourceData],
    test: &LabeledDataset,
    provider: &dyn EmbeddingProvider,
    cfg: &ClassifierConfig,
    excluded: &[&str],
) -> Result<EvalReport> {
    cfg.validate()?;
    if sources.is_empty() {
        return Err(Error::DegenerateInput("no source languages".to_string()));
    }
    for s in sources {
        if s.train.label_names != test.label_names || s.dev.label_names != test.label_names {
            return Err(Error::Schema(format!("{}: label vocabulary differs from the test split", s.lang)));
        }
    }
    let test_x = embed_unique(provider, &test.texts())?;
    let test_y = test.labels();
    let features = sources
        .iter()
        .map(|s| Ok((embed_unique(provider, &s.train.texts())?, embed_unique(provider, &s.dev.texts())?)))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> =
        (0..sources.len()).flat_map(|i| cfg.seeds.iter().map(move |&s| (i, s))).collect();
    let k = test.label_names.len();
    let scores = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let (tx, dx) = &features[i];
            let src = &sources[i];
            let out = train_linear_classifier_on_features(tx, &src.train.labels(), dx, &src.dev.labels(), k, cfg, seed)?;
            out.classifier.accuracy(&test_x, &test_y)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut per_lang: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut details = BTreeMap::new();
    for (&(i, seed), &acc) in jobs.iter().zip(&scores) {
        per_lang.entry(sources[i].lang.clone()).or_default().push(acc);
        details.insert(format!("{}/seed{seed}", sources[i].lang), acc);
    }
    let mut breakdown = BTreeMap::new();
    let mut left_out = BTreeMap::new();
    for (lang, accs) in per_lang {
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        if excluded.contains(&lang.as_str()) {
            left_out.insert(lang, mean);
        } else {
            breakdown.insert(lang, mean);
        }
    }
    let mut report = EvalReport::new("transfer", breakdown)?
        .with_provider(provider.model_id())
        .with_config(json!({"classifier": cfg, "excluded": excluded}));
    report.excluded = left_out;
    report.details = details;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalsuite::{Split, LB_LABELS};
    use crate::providers::{MockEmbedder, MockSpec};
    use std::collections::HashMap;

    fn names() -> Vec<String> {
        LB_LABELS.iter().map(|s| s.to_string()).collect()
    }

    fn dataset(lang: &str, split: Split, n: usize, concepts: &mut HashMap<String, String>) -> LabeledDataset {
        let items: Vec<(String, usize)> = (0..n).map(|i| (format!("{lang} {split} {i}"), i % 7)).collect();
        for (t, l) in &items {
            concepts.insert(t.clone(), format!("label{l}"));
        }
        LabeledDataset::new(split, items, names()).unwrap()
    }

    #[test]
    fn shared_concepts_transfer_perfectly() {
        let mut concepts = HashMap::new();
        let sources: Vec<SourceData> = ["de", "en", "lb"]
            .iter()
            .map(|l| SourceData {
                lang: l.to_string(),
                train: dataset(l, Split::Train, 28, &mut concepts),
                dev: dataset(l, Split::Dev, 14, &mut concepts),
            })
            .collect();
        let test = dataset("lb", Split::Test, 21, &mut concepts);
        let mock = MockEmbedder::new(MockSpec::new(32, 0.05).with_concepts(concepts)).unwrap();
        let cfg = ClassifierConfig { epochs: 100, seeds: vec![0, 1], ..Default::default() };
        let r = transfer_eval(&sources, &test, &mock, &cfg, &DEFAULT_EXCLUDED_SOURCES).unwrap();
        assert_eq!(r.breakdown.keys().collect::<Vec<_>>(), vec!["de", "en"]);
        assert!(r.excluded.contains_key("lb"));
        assert!(r.breakdown.values().all(|&v| v == 1.0));
        assert_eq!(r.details.len(), 6);
        for lang in ["de", "en"] {
            let by_hand = (r.details[&format!("{lang}/seed0")] + r.details[&format!("{lang}/seed1")]) / 2.0;
            assert_eq!(r.breakdown[lang], by_hand);
        }
    }
}
