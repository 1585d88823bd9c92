//! Minimal TSV helpers shared by the file formats.
//!
//! Fields are backslash-escaped (`\\`, `\t`, `\n`, `\r`) so every record is
//! one physical line. A first line of the form `# config_hash=<hex>` is a
//! reproducibility header and is skipped by [`read_records`].

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const HASH_HEADER_PREFIX: &str = "# config_hash=";

pub fn escape(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    for c in field.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            _ => out.push(c),
        }
    }
    out
}

pub fn unescape(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

pub fn write_record<W: Write, S: AsRef<str>>(out: &mut W, fields: &[S]) -> Result<()> {
    let line: Vec<String> = fields.iter().map(|f| escape(f.as_ref())).collect();
    writeln!(out, "{}", line.join("\t"))?;
    Ok(())
}

pub fn write_hash_header<W: Write>(out: &mut W, config_hash: Option<&str>) -> Result<()> {
    if let Some(h) = config_hash {
        writeln!(out, "{HASH_HEADER_PREFIX}{h}")?;
    }
    Ok(())
}

/// Reads all records, skipping a leading config-hash line, blank lines and
/// (if `header` is given) a column header equal to it. Each record is
/// checked for exactly `columns` fields when `columns` is nonzero.
pub fn read_records<R: BufRead>(input: R, header: Option<&[&str]>, columns: usize) -> Result<Vec<Vec<String>>> {
    let mut records = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if lineno == 0 && line.starts_with(HASH_HEADER_PREFIX) {
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split('\t').map(unescape).collect();
        if records.is_empty() {
            if let Some(h) = header {
                if fields.iter().map(String::as_str).eq(h.iter().copied()) {
                    continue;
                }
            }
        }
        if columns != 0 && fields.len() != columns {
            return Err(Error::Schema(format!(
                "line {}: expected {columns} columns, found {}",
                lineno + 1,
                fields.len()
            )));
        }
        records.push(fields);
    }
    Ok(records)
}

/// Writes one JSON object per line after the optional config-hash line.
pub fn write_jsonl<W: Write, T: serde::Serialize>(out: &mut W, items: &[T], config_hash: Option<&str>) -> Result<()> {
    write_hash_header(out, config_hash)?;
    for item in items {
        serde_json::to_writer(&mut *out, item)?;
        writeln!(out)?;
    }
    Ok(())
}

/// Reads JSON lines, skipping a leading config-hash line and blank lines.
pub fn read_jsonl<R: BufRead, T: serde::de::DeserializeOwned>(input: R) -> Result<Vec<T>> {
    let mut items = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if (lineno == 0 && line.starts_with(HASH_HEADER_PREFIX)) || line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| Error::Schema(format!("line {}: {e}", lineno + 1)))?;
        items.push(item);
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_and_hash_line_are_skipped() {
        let data = "# config_hash=abc\na\tb\nx\\ty\tz\n";
        let rows = read_records(data.as_bytes(), Some(&["a", "b"]), 2).unwrap();
        assert_eq!(rows, vec![vec!["x\ty".to_string(), "z".to_string()]]);
    }

    #[test]
    fn column_count_is_checked() {
        let err = read_records("a\tb\tc\n".as_bytes(), None, 2).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    proptest! {
        #[test]
        fn escape_round_trip(s in "\\PC*") {
            let e = escape(&s);
            prop_assert!(!e.contains('\t') && !e.contains('\n'));
            prop_assert_eq!(unescape(&e), s);
        }
    }
}
