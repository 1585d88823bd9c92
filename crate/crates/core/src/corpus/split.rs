use std::collections::HashSet;

use super::{Document, Sentence};

const TERMINALS: &[char] = &['.', '!', '?', '…'];
const CLOSING: &[char] = &['"', '\'', '”', '“', '’', '»', '«', ')', ']'];
const OPENING: &[char] = &['"', '\'', '„', '“', '‘', '«', '»', '‹', '('];

const MONTHS: &[&str] = &[
    "januar", "jänner", "februar", "märz", "mäerz", "april", "abrëll", "mai", "mee", "juni", "juli", "august",
    "september", "oktober", "november", "dezember",
];

fn builtin_list(lang: &str) -> &'static str {
    match lang {
        "en" => include_str!("../../data/abbreviations/en.txt"),
        "fr" => include_str!("../../data/abbreviations/fr.txt"),
        "lb" => include_str!("../../data/abbreviations/lb.txt"),
        _ => include_str!("../../data/abbreviations/de.txt"),
    }
}

/// Parses an abbreviation list: one entry per line, `#` comments, final
/// period optional.
pub fn parse_abbreviations(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.trim_end_matches('.').to_lowercase())
        .collect()
}

/// Rule-based splitter: a run of terminal punctuation (plus closing quotes
/// or brackets) followed by whitespace and an uppercase letter or opening
/// quote ends a sentence, unless the period belongs to a known abbreviation,
/// a single-letter initial or an ordinal before a month name.
#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: HashSet<String>,
}

impl SentenceSplitter {
    /// Shipped list for `lang`; Luxembourgish uses the German list extended
    /// with its own entries, unknown languages the German list.
    pub fn for_language(lang: &str) -> Self {
        let mut abbreviations = parse_abbreviations(builtin_list(lang));
        if lang == "lb" {
            abbreviations.extend(parse_abbreviations(builtin_list("de")));
        }
        Self { abbreviations }
    }

    pub fn with_abbreviations(abbreviations: HashSet<String>) -> Self {
        Self { abbreviations }
    }

    pub fn abbreviations(&self) -> &HashSet<String> {
        &self.abbreviations
    }

    /// Character spans `(start, end)` of the sentences of `body`.
    pub fn spans(&self, body: &str) -> Vec<(usize, usize)> {
        let chars: Vec<char> = body.chars().collect();
        let n = chars.len();
        let mut spans = Vec::new();
        let Some(mut start) = chars.iter().position(|c| !c.is_whitespace()) else {
            return spans;
        };
        let mut i = start;
        while i < n {
            if !TERMINALS.contains(&chars[i]) {
                i += 1;
                continue;
            }
            let mut j = i;
            while j < n && TERMINALS.contains(&chars[j]) {
                j += 1;
            }
            let single_period = j == i + 1 && chars[i] == '.';
            while j < n && CLOSING.contains(&chars[j]) {
                j += 1;
            }
            let mut k = j;
            while k < n && chars[k].is_whitespace() {
                k += 1;
            }
            let boundary = k > j && k < n && (chars[k].is_uppercase() || OPENING.contains(&chars[k]));
            if boundary && !(single_period && self.protected(&chars, start, i, k)) {
                spans.push((start, j));
                start = k;
                i = k;
            } else {
                i = j.max(i + 1);
            }
        }
        let mut end = n;
        while end > start && chars[end - 1].is_whitespace() {
            end -= 1;
        }
        if end > start {
            spans.push((start, end));
        }
        spans
    }

    /// Whether the period at `dot` is not a sentence end. `next` is the
    /// first character of the following word.
    fn protected(&self, chars: &[char], start: usize, dot: usize, next: usize) -> bool {
        let mut t = dot;
        while t > start && !chars[t - 1].is_whitespace() {
            t -= 1;
        }
        let token: String = chars[t..dot].iter().skip_while(|c| OPENING.contains(c)).collect();
        if token.is_empty() {
            return false;
        }
        if self.abbreviations.contains(&token.to_lowercase()) {
            return true;
        }
        let mut letters = token.chars();
        if let (Some(c), None) = (letters.next(), letters.next()) {
            if c.is_alphabetic() && c.is_uppercase() {
                return true;
            }
        }
        if token.len() <= 2 && token.chars().all(|c| c.is_ascii_digit()) {
            let word: String = chars[next..].iter().take_while(|c| c.is_alphabetic()).collect();
            return MONTHS.contains(&word.to_lowercase().as_str());
        }
        false
    }

    pub fn split(&self, doc_id: &str, body: &str) -> Vec<Sentence> {
        let chars: Vec<char> = body.chars().collect();
        self.spans(body)
            .into_iter()
            .enumerate()
            .map(|(index, (start, end))| Sentence {
                doc_id: doc_id.to_string(),
                index,
                start,
                end,
                text: chars[start..end].iter().collect(),
            })
            .collect()
    }
}

/// Splits a cleaned document with the shipped abbreviation list for `lang`.
pub fn split_sentences(doc: &Document, lang: &str) -> Vec<Sentence> {
    SentenceSplitter::for_language(lang).split(&doc.id, &doc.body)
}
