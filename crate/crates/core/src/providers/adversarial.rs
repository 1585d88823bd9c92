//! Adversarial negatives for paraphrase pairs: a deterministic offline
//! meaning-flip transform and a client for chat-style generation endpoints.

use std::sync::{Arc, LazyLock};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::http::{post_with_retries, Clock, RetryPolicy, SystemClock, Transport, UreqTransport, API_KEY_ENV};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformRule {
    SubjectObjectSwap,
    NumeralPerturbation,
    NegationToggle,
}

impl TransformRule {
    /// Order in which the offline transform tries the rules.
    pub const ORDER: [TransformRule; 3] =
        [Self::SubjectObjectSwap, Self::NumeralPerturbation, Self::NegationToggle];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SubjectObjectSwap => "subject_object_swap",
            Self::NumeralPerturbation => "numeral_perturbation",
            Self::NegationToggle => "negation_toggle",
        }
    }
}

/// A generated negative. `rule` is set by the offline transform and empty
/// for remote generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialText {
    pub text: String,
    pub rule: Option<TransformRule>,
}

pub trait TextGenerator: Send + Sync {
    fn generate(&self, anchor: &str, paraphrase: &str) -> Result<AdversarialText>;
}

/// Checks the inputs and asks `generator` for a negative of the pair.
pub fn generate_adversarial(
    anchor: &str,
    paraphrase: &str,
    generator: &dyn TextGenerator,
) -> Result<AdversarialText> {
    if anchor.trim().is_empty() {
        return Err(Error::EmptyText(0));
    }
    if paraphrase.trim().is_empty() {
        return Err(Error::EmptyText(1));
    }
    generator.generate(anchor, paraphrase)
}

const NAME: &str = r"\p{Lu}[\p{L}\-]*(?:\s+\p{Lu}[\p{L}\-]*)*";

static SWAP: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"\b(?P<x>{NAME})(?P<mid>\s+(?:gewënnt|verléiert|wins|loses|beats|defeats|gagne|perd|bat|gewinnt|verliert|schlägt)\s+(?:\d+\s*[-:]\s*\d+\s+)?(?:(?:géint|against|contre|gegen)\s+)?)(?P<y>{NAME})"
    ))
    .unwrap()
});

static NUMERAL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+(?:[.,]\d+)*").unwrap());

struct Negation {
    lang: &'static str,
    particle: &'static str,
    auxiliaries: &'static [&'static str],
}

const NEGATIONS: &[Negation] = &[
    Negation {
        lang: "lb",
        particle: "net",
        auxiliaries: &["ass", "sinn", "huet", "hunn", "gëtt", "ginn", "gouf", "goufen", "kann", "kënnen", "wëllt", "muss", "soll", "wäert"],
    },
    Negation {
        lang: "en",
        particle: "not",
        auxiliaries: &["is", "are", "was", "were", "has", "have", "had", "will", "can", "could", "should", "would", "must"],
    },
    Negation {
        lang: "de",
        particle: "nicht",
        auxiliaries: &["ist", "sind", "hat", "haben", "wird", "werden", "wurde", "wurden", "kann", "können", "muss", "soll", "will"],
    },
];

const FRENCH_AUXILIARIES: &[&str] = &["est", "sont", "a", "ont", "était", "sera", "peut", "doit", "va"];

/// Deterministic meaning-flip edits applied to the anchor.
#[derive(Debug, Clone, Default)]
pub struct OfflineTransform {
    /// Restricts negation edits to one language; `None` tries lb, en, de, fr.
    pub lang: Option<String>,
}

impl OfflineTransform {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn for_language(lang: impl Into<String>) -> Self {
        Self { lang: Some(lang.into()) }
    }

    /// Applies one rule, `None` when it has no edit site.
    pub fn apply(&self, rule: TransformRule, text: &str) -> Option<String> {
        match rule {
            TransformRule::SubjectObjectSwap => swap_subject_object(text),
            TransformRule::NumeralPerturbation => perturb_numeral(text),
            TransformRule::NegationToggle => self.toggle_negation(text),
        }
    }

    fn wants(&self, lang: &str) -> bool {
        self.lang.as_deref().is_none_or(|l| l == lang)
    }

    fn toggle_negation(&self, text: &str) -> Option<String> {
        let words = word_spans(text);
        for neg in NEGATIONS.iter().filter(|n| self.wants(n.lang)) {
            if let Some(&(s, e)) = words.iter().find(|&&(s, e)| text[s..e].eq_ignore_ascii_case(neg.particle)) {
                return Some(remove_word(text, s, e));
            }
        }
        if self.wants("fr") {
            if let Some(out) = remove_french_negation(text, &words) {
                return Some(out);
            }
        }
        for neg in NEGATIONS.iter().filter(|n| self.wants(n.lang)) {
            if let Some(&(_, e)) = words.iter().find(|&&(s, e)| neg.auxiliaries.contains(&&text[s..e])) {
                return Some(format!("{} {}{}", &text[..e], neg.particle, &text[e..]));
            }
        }
        if self.wants("fr") {
            if let Some(&(s, e)) = words.iter().find(|&&(s, e)| FRENCH_AUXILIARIES.contains(&&text[s..e])) {
                let verb = &text[s..e];
                let ne = if verb.starts_with(|c: char| "aeiouéèêh".contains(c)) { "n'" } else { "ne " };
                return Some(format!("{}{ne}{verb} pas{}", &text[..s], &text[e..]));
            }
        }
        None
    }
}

impl TextGenerator for OfflineTransform {
    fn generate(&self, anchor: &str, paraphrase: &str) -> Result<AdversarialText> {
        for rule in TransformRule::ORDER {
            if let Some(text) = self.apply(rule, anchor) {
                if text != anchor && text != paraphrase {
                    return Ok(AdversarialText { text, rule: Some(rule) });
                }
            }
        }
        Err(Error::NoRuleApplicable(anchor.to_string()))
    }
}

fn swap_subject_object(text: &str) -> Option<String> {
    let caps = SWAP.captures(text)?;
    let (x, y) = (&caps["x"], &caps["y"]);
    if x == y {
        return None;
    }
    let whole = caps.get(0).unwrap();
    Some(format!("{}{y}{}{x}{}", &text[..whole.start()], &caps["mid"], &text[whole.end()..]))
}

/// Changes the leading digit of the first numeral: d becomes d+1, 9 becomes 8.
fn perturb_numeral(text: &str) -> Option<String> {
    let m = NUMERAL.find(text)?;
    let first = text[m.start()..].chars().next()?;
    let d = first.to_digit(10)?;
    let replacement = char::from_digit(if d == 9 { 8 } else { d + 1 }, 10)?;
    let mut out = String::with_capacity(text.len());
    out.push_str(&text[..m.start()]);
    out.push(replacement);
    out.push_str(&text[m.start() + first.len_utf8()..]);
    Some(out)
}

fn word_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_alphanumeric(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}

/// Removes the word at `s..e` together with one neighbouring space.
fn remove_word(text: &str, s: usize, e: usize) -> String {
    if text[..s].ends_with(' ') {
        format!("{}{}", &text[..s - 1], &text[e..])
    } else if text[e..].starts_with(' ') {
        format!("{}{}", &text[..s], &text[e + 1..])
    } else {
        format!("{}{}", &text[..s], &text[e..])
    }
}

/// Drops "ne"/"n'" and the following "pas".
fn remove_french_negation(text: &str, words: &[(usize, usize)]) -> Option<String> {
    let pas = words.iter().position(|&(s, e)| &text[s..e] == "pas")?;
    let ne = words[..pas].iter().rposition(|&(s, e)| {
        let w = &text[s..e];
        w.eq_ignore_ascii_case("ne") || (w.eq_ignore_ascii_case("n") && text[e..].starts_with(['\'', '\u{2019}']))
    })?;
    let (ps, pe) = words[pas];
    let without_pas = remove_word(text, ps, pe);
    let (ns, ne_end) = words[ne];
    let out = if text[ns..ne_end].eq_ignore_ascii_case("n") {
        let apostrophe = text[ne_end..].chars().next().unwrap().len_utf8();
        format!("{}{}", &without_pas[..ns], &without_pas[ne_end + apostrophe..])
    } else {
        remove_word(&without_pas, ns, ne_end)
    };
    Some(out)
}

pub const DEFAULT_PROMPT: &str = "Rewrite the first sentence so that it keeps almost all of its words but \
no longer means the same as either sentence (for example swap who did what, change a number or add a \
negation). Answer with the rewritten sentence only.\nSentence 1: {anchor}\nSentence 2: {paraphrase}";

/// Negative generation through a chat-completions style endpoint:
/// request `{"model", "messages": [{"role": "user", "content"}], "temperature": 0}`,
/// response text read from `choices[0].message.content`.
pub struct HttpGenerator {
    pub endpoint_url: String,
    pub model_id: String,
    pub prompt_template: String,
    pub timeout: Duration,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    retry: RetryPolicy,
    api_key: Option<String>,
}

impl HttpGenerator {
    pub fn new(endpoint_url: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self::with_transport(
            endpoint_url,
            model_id,
            Arc::new(UreqTransport::default()),
            Arc::new(SystemClock::default()),
            std::env::var(API_KEY_ENV).ok(),
        )
    }

    pub fn with_transport(
        endpoint_url: impl Into<String>,
        model_id: impl Into<String>,
        transport: Arc<dyn Transport>,
        clock: Arc<dyn Clock>,
        api_key: Option<String>,
    ) -> Self {
        Self {
            endpoint_url: endpoint_url.into(),
            model_id: model_id.into(),
            prompt_template: DEFAULT_PROMPT.to_string(),
            timeout: Duration::from_secs(60),
            transport,
            clock,
            retry: RetryPolicy::default(),
            api_key,
        }
    }

    pub fn with_prompt(mut self, template: impl Into<String>) -> Self {
        self.prompt_template = template.into();
        self
    }

    pub fn prompt(&self, anchor: &str, paraphrase: &str) -> String {
        self.prompt_template.replace("{anchor}", anchor).replace("{paraphrase}", paraphrase)
    }
}

impl TextGenerator for HttpGenerator {
    fn generate(&self, anchor: &str, paraphrase: &str) -> Result<AdversarialText> {
        let body = json!({
            "model": self.model_id,
            "messages": [{"role": "user", "content": self.prompt(anchor, paraphrase)}],
            "temperature": 0,
        });
        let raw = post_with_retries(
            self.transport.as_ref(),
            self.clock.as_ref(),
            &self.retry,
            &self.endpoint_url,
            self.api_key.as_deref(),
            &body,
            self.timeout,
        )?;
        let value: serde_json::Value = serde_json::from_str(&raw)?;
        let text = value
            .pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::Transport("generation response has no message content".to_string()))?;
        Ok(AdversarialText { text, rule: None })
    }
}
