use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-language split sizes of SIB-200 (train, dev, test).
pub const SIB200_SHAPE: (usize, usize, usize) = (701, 99, 204);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" | "validation" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::Schema(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub split: Split,
    pub items: Vec<(String, usize)>,
    pub label_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(split: Split, items: Vec<(String, usize)>, label_names: Vec<String>) -> Result<Self> {
        if label_names.is_empty() {
            return Err(Error::Schema("label vocabulary is empty".to_string()));
        }
        if let Some((text, l)) = items.iter().find(|(_, l)| *l >= label_names.len()) {
            return Err(Error::Schema(format!("label index {l} out of range for item {text:?}")));
        }
        Ok(Self { split, items, label_names })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn texts(&self) -> Vec<String> {
        self.items.iter().map(|(t, _)| t.clone()).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.items.iter().map(|(_, l)| *l).collect()
    }
}

/// Label vocabulary: one name per nonempty line, in index order.
pub fn read_label_names(path: &Path) -> Result<Vec<String>> {
    let names: Vec<String> = std::fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    if names.is_empty() {
        return Err(Error::Schema(format!("{}: no labels", path.display())));
    }
    Ok(names)
}

#[derive(Deserialize)]
struct JsonItem {
    text: String,
    label: serde_json::Value,
}

fn label_index(label: &str, names: &[String], line: usize) -> Result<usize> {
    names
        .iter()
        .position(|n| n == label)
        .ok_or_else(|| Error::Schema(format!("line {line}: unknown label {label:?}")))
}

/// Reads `(text, label_name)` rows. Files ending in `.jsonl` hold one
/// `{"text", "label"}` object per line, where the label is a name or an index.
/// A TSV header line `text\tlabel...` is skipped.
pub fn read_labeled_tsv(path: &Path, split: Split, label_names: &[String]) -> Result<LabeledDataset> {
    let content = std::fs::read_to_string(path)?;
    let jsonl = path.extension().is_some_and(|e| e == "jsonl");
    let mut items = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if jsonl {
            let item: JsonItem = serde_json::from_str(line)?;
            let label = match &item.label {
                serde_json::Value::String(s) => label_index(s, label_names, n)?,
                serde_json::Value::Number(x) => x
                    .as_u64()
                    .map(|x| x as usize)
                    .ok_or_else(|| Error::Schema(format!("line {n}: bad label {x}")))?,
                other => return Err(Error::Schema(format!("line {n}: bad label {other}"))),
            };
            items.push((item.text, label));
            continue;
        }
        let mut cols = line.split('\t');
        let (Some(text), Some(label)) = (cols.next(), cols.next()) else {
            return Err(Error::Schema(format!("line {n}: expected text<TAB>label")));
        };
        if i == 0 && text == "text" {
            continue;
        }
        items.push((text.to_string(), label_index(label.trim(), label_names, n)?));
    }
    LabeledDataset::new(split, items, label_names.to_vec())
}

/// Errors unless the splits have the SIB-200 sizes.
pub fn check_sib_shape(train: &LabeledDataset, dev: &LabeledDataset, test: &LabeledDataset) -> Result<()> {
    let got = (train.len(), dev.len(), test.len());
    if got != SIB200_SHAPE {
        return Err(Error::Schema(format!("split sizes {got:?} differ from {SIB200_SHAPE:?}")));
    }
    Ok(())
}
