use bitextkit_core::providers::{LanguageIdentifier, LanguageProfiles};

#[test]
fn held_out_sentences_are_identified() {
    let profiles = LanguageProfiles::builtin();
    let fixture = include_str!("fixtures/langid_heldout.tsv");
    let mut total = 0;
    let mut correct = 0;
    for line in fixture.lines().filter(|l| !l.is_empty()) {
        let (lang, text) = line.split_once('\t').unwrap();
        assert!(text.chars().count() >= 40, "{text}");
        total += 1;
        let pred = profiles.identify(text).unwrap();
        if pred.lang == lang {
            correct += 1;
        } else {
            eprintln!("misclassified {lang} as {}: {text}", pred.lang);
        }
    }
    let accuracy = correct as f64 / total as f64;
    assert!(accuracy >= 0.95, "accuracy {accuracy}");
}
