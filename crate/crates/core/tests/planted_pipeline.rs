use std::collections::BTreeSet;

use bitextkit_core::corpus::{prepare_corpus, FilterPolicy};
use bitextkit_core::miner::{mine_pairs, mine_paraphrases, MinerConfig};
use bitextkit_core::providers::{LanguageProfiles, MockEmbedder, MockSpec};
use bitextkit_core::synth::planted_world;

fn mock(noise: f64, w: &bitextkit_core::synth::PlantedWorld) -> MockEmbedder {
    MockEmbedder::new(MockSpec::new(256, noise).with_concepts(w.concept_map())).unwrap()
}

#[test]
fn planted_corpus_survives_preparation() {
    let w = planted_world();
    let lid = LanguageProfiles::builtin();
    let policy = FilterPolicy::default();
    for docs in [&w.lb, &w.en, &w.fr, &w.mono_lb] {
        let p = prepare_corpus(docs, &policy, &lid).unwrap();
        assert!(p.rejections.is_empty(), "{:?}", p.rejections);
        assert_eq!(p.documents.len(), docs.len());
        for d in &p.documents {
            let raw = docs.iter().find(|r| r.id == d.id).unwrap();
            assert_eq!(d.body, raw.body);
        }
    }
}

#[test]
fn planted_pairs_are_recovered() {
    let w = planted_world();
    let lid = LanguageProfiles::builtin();
    let policy = FilterPolicy::default();
    let lb = prepare_corpus(&w.lb, &policy, &lid).unwrap().documents;
    let en = prepare_corpus(&w.en, &policy, &lid).unwrap().documents;
    let fr = prepare_corpus(&w.fr, &policy, &lid).unwrap().documents;
    for (noise, exact) in [(0.0, true), (0.15, false)] {
        let m = mock(noise, &w);
        let cfg = MinerConfig::default();
        let mut found = BTreeSet::new();
        for tgt in [&en, &fr] {
            let out = mine_pairs(&lb, tgt, &m, &m, &cfg).unwrap();
            found.extend(out.pairs.into_iter().map(|p| (p.src_text, p.tgt_text)));
        }
        let hits = found.intersection(&w.parallel_key).count();
        let precision = hits as f64 / found.len() as f64;
        if exact {
            assert_eq!(found, w.parallel_key);
        } else {
            assert!(precision >= 0.95, "precision {precision}");
        }
    }
    let m = mock(0.0, &w);
    let mono = prepare_corpus(&w.mono_lb, &policy, &lid).unwrap().documents;
    let out = mine_paraphrases(&mono, &m, &m, &MinerConfig::default()).unwrap();
    let found: BTreeSet<(String, String)> = out
        .pairs
        .into_iter()
        .map(|p| if p.src_text < p.tgt_text { (p.src_text, p.tgt_text) } else { (p.tgt_text, p.src_text) })
        .collect();
    assert_eq!(found, w.paraphrase_key);
}
