//! Character-trigram language identification with the out-of-place rank
//! metric.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Number of ranked trigrams kept per profile.
pub const PROFILE_SIZE: usize = 300;

/// Texts with fewer trigrams than this get proportionally lower confidence.
const FULL_CONFIDENCE_TRIGRAMS: usize = 20;

/// Languages shipped with in-repo seed text.
pub const BUILTIN_SEED_LANGS: &[&str] = &["lb", "en", "fr", "de"];

const DEFAULT_LANGS: &[&str] = &["lb", "en", "fr"];

fn builtin_seed(lang: &str) -> Option<&'static str> {
    match lang {
        "lb" => Some(include_str!("../../data/langid/lb.txt")),
        "en" => Some(include_str!("../../data/langid/en.txt")),
        "fr" => Some(include_str!("../../data/langid/fr.txt")),
        "de" => Some(include_str!("../../data/langid/de.txt")),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LangPrediction {
    pub lang: String,
    pub confidence: f64,
}

pub trait LanguageIdentifier: Send + Sync {
    fn identify(&self, text: &str) -> Result<LangPrediction>;

    /// Whether `lang` can be predicted at all. Gates skip unsupported
    /// languages instead of rejecting everything.
    fn supports(&self, _lang: &str) -> bool {
        true
    }
}

impl<L: LanguageIdentifier + ?Sized> LanguageIdentifier for &L {
    fn identify(&self, text: &str) -> Result<LangPrediction> {
        (**self).identify(text)
    }

    fn supports(&self, lang: &str) -> bool {
        (**self).supports(lang)
    }
}

impl<L: LanguageIdentifier + ?Sized> LanguageIdentifier for std::sync::Arc<L> {
    fn identify(&self, text: &str) -> Result<LangPrediction> {
        (**self).identify(text)
    }

    fn supports(&self, lang: &str) -> bool {
        (**self).supports(lang)
    }
}

/// Counts padded character trigrams. Words are maximal runs of letters and
/// apostrophes, lowercased after NFC.
fn trigram_counts(text: &str) -> HashMap<String, usize> {
    let lowered: String = text.nfc().flat_map(char::to_lowercase).collect();
    let mut counts = HashMap::new();
    let mut word = Vec::new();
    let mut flush = |word: &mut Vec<char>| {
        if word.is_empty() {
            return;
        }
        let mut padded = Vec::with_capacity(word.len() + 2);
        padded.push('_');
        padded.append(word);
        padded.push('_');
        for w in padded.windows(3) {
            *counts.entry(w.iter().collect::<String>()).or_insert(0) += 1;
        }
    };
    for c in lowered.chars() {
        if c.is_alphabetic() {
            word.push(c);
        } else if c == '\'' || c == '\u{2019}' {
            word.push('\'');
        } else {
            flush(&mut word);
        }
    }
    flush(&mut word);
    counts
}

fn ranked(counts: &HashMap<String, usize>, size: usize) -> Vec<String> {
    let mut items: Vec<(&String, &usize)> = counts.iter().collect();
    items.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    items.into_iter().take(size).map(|(t, _)| t.clone()).collect()
}

/// Ranked trigram list of one language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigramProfile {
    ranks: HashMap<String, usize>,
    size: usize,
}

impl TrigramProfile {
    pub fn from_text(text: &str) -> Self {
        Self::with_size(text, PROFILE_SIZE)
    }

    pub fn with_size(text: &str, size: usize) -> Self {
        let ranks = ranked(&trigram_counts(text), size)
            .into_iter()
            .enumerate()
            .map(|(r, t)| (t, r))
            .collect();
        Self { ranks, size }
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// Out-of-place distance of a ranked document profile against this one.
    /// Trigrams missing from the language profile cost the profile size.
    pub fn distance(&self, document: &[String]) -> usize {
        document
            .iter()
            .enumerate()
            .map(|(r, t)| match self.ranks.get(t) {
                Some(&lr) => r.abs_diff(lr),
                None => self.size,
            })
            .sum()
    }
}

/// A set of language profiles; the in-repo identifier.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LanguageProfiles {
    profiles: BTreeMap<String, TrigramProfile>,
}

impl LanguageProfiles {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds one profile per `(lang, seed text)` entry. Repeated languages
    /// have their seed texts concatenated.
    pub fn train<'a, I>(seeds: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut joined: BTreeMap<String, String> = BTreeMap::new();
        for (lang, text) in seeds {
            let entry = joined.entry(lang.to_string()).or_default();
            entry.push('\n');
            entry.push_str(text);
        }
        let profiles = joined.into_iter().map(|(l, t)| (l, TrigramProfile::from_text(&t))).collect();
        Self { profiles }
    }

    /// Profiles for lb, en and fr from the shipped seed text.
    pub fn builtin() -> Self {
        Self::builtin_for(DEFAULT_LANGS).expect("shipped languages")
    }

    pub fn builtin_for(langs: &[&str]) -> Result<Self> {
        let mut seeds = Vec::with_capacity(langs.len());
        for &lang in langs {
            let text = builtin_seed(lang).ok_or_else(|| Error::UnknownLanguage(lang.to_string()))?;
            seeds.push((lang, text));
        }
        Ok(Self::train(seeds))
    }

    pub fn builtin_seed_text(lang: &str) -> Option<&'static str> {
        builtin_seed(lang)
    }

    pub fn insert(&mut self, lang: impl Into<String>, profile: TrigramProfile) {
        self.profiles.insert(lang.into(), profile);
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.profiles.keys().map(String::as_str)
    }

    pub fn contains(&self, lang: &str) -> bool {
        self.profiles.contains_key(lang)
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    /// Distances to every profile, in language order.
    pub fn distances(&self, text: &str) -> Vec<(String, usize)> {
        let doc = ranked(&trigram_counts(text), PROFILE_SIZE);
        self.profiles.iter().map(|(l, p)| (l.clone(), p.distance(&doc))).collect()
    }
}

impl LanguageIdentifier for LanguageProfiles {
    fn supports(&self, lang: &str) -> bool {
        self.contains(lang)
    }

    fn identify(&self, text: &str) -> Result<LangPrediction> {
        if self.profiles.len() < 2 {
            return Err(Error::NoProfiles);
        }
        if text.trim().is_empty() {
            return Err(Error::EmptyText(0));
        }
        let counts = trigram_counts(text);
        let n_trigrams: usize = counts.values().sum();
        let doc = ranked(&counts, PROFILE_SIZE);
        let mut best: Option<(&str, usize)> = None;
        let mut second = usize::MAX;
        for (lang, profile) in &self.profiles {
            let d = profile.distance(&doc);
            match best {
                Some((_, bd)) if d >= bd => second = second.min(d),
                _ => {
                    if let Some((_, bd)) = best {
                        second = second.min(bd);
                    }
                    best = Some((lang, d));
                }
            }
        }
        let (lang, d1) = best.expect("at least two profiles");
        let margin = if second == 0 { 0.0 } else { (second - d1) as f64 / second as f64 };
        let length_factor = (n_trigrams as f64 / FULL_CONFIDENCE_TRIGRAMS as f64).min(1.0);
        Ok(LangPrediction { lang: lang.to_string(), confidence: (margin * length_factor).clamp(0.0, 1.0) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trigrams_are_padded_per_word() {
        let c = trigram_counts("Ab c");
        assert_eq!(c.get("_ab"), Some(&1));
        assert_eq!(c.get("ab_"), Some(&1));
        assert_eq!(c.get("_c_"), Some(&1));
        assert_eq!(c.values().sum::<usize>(), 3);
    }

    #[test]
    fn english_pangram() {
        let p = LanguageProfiles::builtin();
        let pred = p.identify("the quick brown fox jumps over the lazy dog").unwrap();
        assert_eq!(pred.lang, "en");
    }

    #[test]
    fn seed_text_classifies_as_itself() {
        let p = LanguageProfiles::builtin_for(BUILTIN_SEED_LANGS).unwrap();
        for &lang in BUILTIN_SEED_LANGS {
            let pred = p.identify(LanguageProfiles::builtin_seed_text(lang).unwrap()).unwrap();
            assert_eq!(pred.lang, lang);
            assert!(pred.confidence > 0.2, "{lang}: {}", pred.confidence);
        }
    }

    #[test]
    fn three_characters_is_low_confidence() {
        let p = LanguageProfiles::builtin();
        for text in ["abc", "der", "les", "the", "ass"] {
            let pred = p.identify(text).unwrap();
            assert!(pred.confidence < 0.2, "{text}: {}", pred.confidence);
        }
    }

    #[test]
    fn errors() {
        let one = LanguageProfiles::train([("en", "hello world")]);
        assert!(matches!(one.identify("hello"), Err(Error::NoProfiles)));
        let p = LanguageProfiles::builtin();
        assert!(matches!(p.identify("  "), Err(Error::EmptyText(_))));
        assert!(matches!(LanguageProfiles::builtin_for(&["xx"]), Err(Error::UnknownLanguage(_))));
    }

    #[test]
    fn deterministic() {
        let p = LanguageProfiles::builtin();
        let t = "D'Regierung huet eng nei Decisioun geholl.";
        assert_eq!(p.identify(t).unwrap(), p.identify(t).unwrap());
        assert_eq!(p.identify(t).unwrap().lang, "lb");
    }
}
