use std::sync::LazyLock;

use regex::Regex;

use super::Document;
use crate::error::{Error, Result};
use crate::hashing::nfc;

static BLOCKS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?is)<(script|style)\b[^>]*>.*?</(script|style)\s*>|<!--.*?-->").unwrap());
static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[^<>]*>").unwrap());
static URL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(?:https?://|ftp://|www\.)\S+").unwrap());
static TEMPLATE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{\{[^{}]*\}\}").unwrap());
static BRACKETED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[[^\[\]]*\]").unwrap());
static ENTITY: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"&(?:amp|lt|gt|quot|apos|nbsp|#\d{1,6}|#x[0-9a-fA-F]{1,6});").unwrap());
static SPACE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+").unwrap());

fn decode_entity(entity: &str) -> String {
    let inner = &entity[1..entity.len() - 1];
    let c = match inner {
        "amp" => Some('&'),
        "lt" => Some('<'),
        "gt" => Some('>'),
        "quot" => Some('"'),
        "apos" => Some('\''),
        "nbsp" => Some(' '),
        _ if inner.starts_with("#x") => u32::from_str_radix(&inner[2..], 16).ok().and_then(char::from_u32),
        _ => inner[1..].parse().ok().and_then(char::from_u32),
    };
    c.map(String::from).unwrap_or_default()
}

fn clean_pass(text: &str) -> String {
    let text = BLOCKS.replace_all(text, " ");
    let text = TAG.replace_all(&text, " ");
    let text = URL.replace_all(&text, " ");
    let text = TEMPLATE.replace_all(&text, " ");
    let text = BRACKETED.replace_all(&text, " ");
    let text = ENTITY.replace_all(&text, |c: &regex::Captures| decode_entity(&c[0]));
    let text: String = text.chars().map(|c| if c.is_control() { ' ' } else { c }).collect();
    let text = nfc(&text);
    SPACE.replace_all(&text, " ").trim().to_string()
}

/// Strips markup, URLs and bracketed metadata, decodes common entities,
/// collapses whitespace and applies NFC. Passes repeat until nothing
/// changes, so the result is a fixed point.
pub fn clean_text(text: &str) -> String {
    let mut current = clean_pass(text);
    loop {
        let next = clean_pass(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

/// Cleans body and title. Sentence spans, if any, are dropped because they
/// refer to the old body.
pub fn clean_document(raw: &Document) -> Result<Document> {
    let body = clean_text(&raw.body);
    if body.is_empty() {
        return Err(Error::EmptyAfterCleaning(raw.id.clone()));
    }
    let title = raw.title.as_deref().map(clean_text).filter(|t| !t.is_empty());
    Ok(Document {
        id: raw.id.clone(),
        lang: raw.lang.clone(),
        published_at: raw.published_at,
        title,
        body,
        sentences: None,
    })
}
