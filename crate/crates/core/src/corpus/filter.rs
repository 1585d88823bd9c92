use serde::{Deserialize, Serialize};

use super::{Document, Sentence};
use crate::hashing::char_len;
use crate::providers::LanguageIdentifier;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterPolicy {
    pub min_doc_chars: usize,
    pub min_sentence_chars: usize,
    pub min_sentence_words: usize,
    pub lang_gate: bool,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self { min_doc_chars: 100, min_sentence_chars: 10, min_sentence_words: 3, lang_gate: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    EmptyAfterCleaning,
    TooShort,
    TooFewWords,
    WrongLanguage,
}

impl RejectReason {
    /// Stable code used in audit logs.
    pub fn as_str(self) -> &'static str {
        match self {
            Self::EmptyAfterCleaning => "empty_after_cleaning",
            Self::TooShort => "too_short",
            Self::TooFewWords => "too_few_words",
            Self::WrongLanguage => "wrong_language",
        }
    }
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Accept,
    Reject(RejectReason),
}

impl Admission {
    pub fn is_accept(self) -> bool {
        self == Self::Accept
    }
}

/// True when the gate is on, the identifier knows `lang` and predicts a
/// different language for `text`.
fn wrong_language(text: &str, lang: &str, policy: &FilterPolicy, lang_id: &dyn LanguageIdentifier) -> bool {
    if !policy.lang_gate || !lang_id.supports(lang) {
        return false;
    }
    match lang_id.identify(text) {
        Ok(pred) => pred.lang != lang,
        Err(e) => {
            log::warn!("language identification failed: {e}");
            false
        }
    }
}

/// Length is counted in Unicode scalars after NFC; bodies exactly at the
/// minimum are accepted.
pub fn admit_document(doc: &Document, policy: &FilterPolicy, lang_id: &dyn LanguageIdentifier) -> Admission {
    if char_len(&doc.body) < policy.min_doc_chars {
        return Admission::Reject(RejectReason::TooShort);
    }
    if wrong_language(&doc.body, &doc.lang, policy, lang_id) {
        return Admission::Reject(RejectReason::WrongLanguage);
    }
    Admission::Accept
}

/// `lang` is the language of the enclosing document.
pub fn admit_sentence(
    sentence: &Sentence,
    lang: &str,
    policy: &FilterPolicy,
    lang_id: &dyn LanguageIdentifier,
) -> Admission {
    if char_len(&sentence.text) < policy.min_sentence_chars {
        return Admission::Reject(RejectReason::TooShort);
    }
    if sentence.text.split_whitespace().count() < policy.min_sentence_words {
        return Admission::Reject(RejectReason::TooFewWords);
    }
    if wrong_language(&sentence.text, lang, policy, lang_id) {
        return Admission::Reject(RejectReason::WrongLanguage);
    }
    Admission::Accept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::LanguageProfiles;

    fn sentence(text: &str) -> Sentence {
        Sentence { doc_id: "d".into(), index: 0, start: 0, end: text.chars().count(), text: text.into() }
    }

    #[test]
    fn document_length_boundary() {
        let p = FilterPolicy { lang_gate: false, ..FilterPolicy::default() };
        let lid = LanguageProfiles::builtin();
        let short = Document::new("a", "lb", 0, "x".repeat(99));
        let exact = Document::new("b", "lb", 0, "x".repeat(100));
        assert_eq!(admit_document(&short, &p, &lid), Admission::Reject(RejectReason::TooShort));
        assert_eq!(admit_document(&exact, &p, &lid), Admission::Accept);
    }

    #[test]
    fn english_body_tagged_lb() {
        let lid = LanguageProfiles::builtin();
        let body = "The weather service expects heavy rain over the weekend, and the authorities have asked \
                    people living near the river to keep an eye on the water levels.";
        let doc = Document::new("e", "lb", 0, body);
        assert_eq!(admit_document(&doc, &FilterPolicy::default(), &lid), Admission::Reject(RejectReason::WrongLanguage));
        let doc = Document::new("e", "en", 0, body);
        assert_eq!(admit_document(&doc, &FilterPolicy::default(), &lid), Admission::Accept);
    }

    #[test]
    fn sentence_thresholds() {
        let lid = LanguageProfiles::builtin();
        let p = FilterPolicy::default();
        assert_eq!(admit_sentence(&sentence("Jo."), "lb", &p, &lid), Admission::Reject(RejectReason::TooShort));
        assert_eq!(admit_sentence(&sentence("Ech si frou"), "lb", &p, &lid), Admission::Accept);
        assert_eq!(
            admit_sentence(&sentence("Eent zwee.."), "lb", &p, &lid),
            Admission::Reject(RejectReason::TooFewWords)
        );
        assert_eq!(
            admit_sentence(&sentence("Bonjour tout le monde ici"), "lb", &p, &lid),
            Admission::Reject(RejectReason::WrongLanguage)
        );
    }

    #[test]
    fn unsupported_language_passes_gate() {
        let lid = LanguageProfiles::builtin();
        let doc = Document::new("x", "pt", 0, "x ".repeat(60));
        assert_eq!(admit_document(&doc, &FilterPolicy::default(), &lid), Admission::Accept);
    }
}
