//! Linear-kernel CKA between parallel embedding sets, pairwise language
//! alignment matrices and high/low-resource group summaries.

mod cka;

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::tsv::HASH_HEADER_PREFIX;

pub use cka::{cka, cka_via, CkaVariant, GramRoute, SAMPLE_GRAM_LIMIT};

/// Sentences per language in the Flores-200 devtest split.
pub const FLORES_DEVTEST_ROWS: usize = 1012;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LanguageGroupSpec {
    pub hr: Vec<String>,
    pub lr: Vec<String>,
}

impl Default for LanguageGroupSpec {
    /// Flores-200 codes of the ten best and ten least represented
    /// languages of the base encoder.
    fn default() -> Self {
        let codes = |s: &[&str]| s.iter().map(|c| c.to_string()).collect();
        Self {
            hr: codes(&["eng", "rus", "jpn", "zho", "fra", "deu", "por", "nld", "spa", "pol"]),
            lr: codes(&["bod", "snd", "tuk", "ydd", "wol", "asm", "smo", "xho", "nya", "sot"]),
        }
    }
}

impl LanguageGroupSpec {
    pub fn new(hr: Vec<String>, lr: Vec<String>) -> Result<Self> {
        let spec = Self { hr, lr };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hr.is_empty() || self.lr.is_empty() {
            return Err(Error::InvalidConfig("groups.hr and groups.lr must both be nonempty".to_string()));
        }
        if let Some(l) = self.hr.iter().find(|l| self.lr.contains(l)) {
            return Err(Error::InvalidConfig(format!("groups: {l} is listed as both hr and lr")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    /// `None` when the group has a single language.
    pub within_hr: Option<f64>,
    pub within_lr: Option<f64>,
    pub between: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub variant: CkaVariant,
    pub languages: Vec<String>,
    /// `matrix[i][j] = cka(languages[i], languages[j])`.
    pub matrix: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<GroupSummary>,
}

impl AlignmentReport {
    pub fn index_of(&self, lang: &str) -> Result<usize> {
        self.languages
            .iter()
            .position(|l| l == lang)
            .ok_or_else(|| Error::UnknownLanguage(lang.to_string()))
    }

    pub fn value(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.matrix[self.index_of(a)?][self.index_of(b)?])
    }

    pub fn with_groups(mut self, spec: &LanguageGroupSpec) -> Result<Self> {
        self.groups = Some(group_summary(&self, spec)?);
        Ok(self)
    }

    /// Languages-by-languages CSV with a header row.
    pub fn write_csv<W: Write>(&self, out: &mut W, config_hash: Option<&str>) -> Result<()> {
        if let Some(h) = config_hash {
            writeln!(out, "{HASH_HEADER_PREFIX}{h}")?;
        }
        writeln!(out, "language,{}", self.languages.join(","))?;
        for (lang, row) in self.languages.iter().zip(&self.matrix) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.9}")).collect();
            writeln!(out, "{lang},{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Pairwise CKA over per-language matrices of the same parallel sentences.
/// Only the upper triangle is computed; the lower one is mirrored.
pub fn alignment_matrix(corpora: &[(String, EmbeddingMatrix)], variant: CkaVariant) -> Result<AlignmentReport> {
    if corpora.is_empty() {
        return Err(Error::DegenerateInput("no languages".to_string()));
    }
    let mut seen = BTreeSet::new();
    if let Some((l, _)) = corpora.iter().find(|(l, _)| !seen.insert(l.as_str())) {
        return Err(Error::Schema(format!("language {l} given twice")));
    }
    let k = corpora.len();
    let cells: Vec<(usize, usize)> = (0..k).flat_map(|i| (i..k).map(move |j| (i, j))).collect();
    let values = cells
        .par_iter()
        .map(|&(i, j)| cka(&corpora[i].1, &corpora[j].1, variant))
        .collect::<Result<Vec<f64>>>()?;
    let mut matrix = vec![vec![0.0; k]; k];
    for (&(i, j), v) in cells.iter().zip(values) {
        matrix[i][j] = v;
        matrix[j][i] = v;
    }
    Ok(AlignmentReport { variant, languages: corpora.iter().map(|(l, _)| l.clone()).collect(), matrix, groups: None })
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Means over unordered distinct pairs within each group and over all
/// HR x LR pairs.
pub fn group_summary(report: &AlignmentReport, spec: &LanguageGroupSpec) -> Result<GroupSummary> {
    spec.validate()?;
    let hr = spec.hr.iter().map(|l| report.index_of(l)).collect::<Result<Vec<_>>>()?;
    let lr = spec.lr.iter().map(|l| report.index_of(l)).collect::<Result<Vec<_>>>()?;
    let within = |idx: &[usize]| {
        let mut v = Vec::new();
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                v.push(report.matrix[i][j]);
            }
        }
        mean(&v)
    };
    let between: Vec<f64> = hr.iter().flat_map(|&i| lr.iter().map(move |&j| report.matrix[i][j])).collect();
    Ok(GroupSummary { within_hr: within(&hr), within_lr: within(&lr), between: mean(&between).expect("both groups nonempty") })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentDelta {
    pub variant: CkaVariant,
    pub languages: Vec<String>,
    /// `after - before` per cell.
    pub matrix: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<GroupSummary>,
    /// Counts of off-diagonal unordered pairs by sign of the delta.
    pub increased: usize,
    pub decreased: usize,
    pub unchanged: usize,
}

pub fn compare_alignment(before: &AlignmentReport, after: &AlignmentReport) -> Result<AlignmentDelta> {
    if before.variant != after.variant {
        return Err(Error::MismatchedReports(format!("variants {} and {} differ", before.variant, after.variant)));
    }
    if before.languages != after.languages {
        return Err(Error::MismatchedReports("language lists differ".to_string()));
    }
    let k = before.languages.len();
    let matrix: Vec<Vec<f64>> =
        (0..k).map(|i| (0..k).map(|j| after.matrix[i][j] - before.matrix[i][j]).collect()).collect();
    let (mut increased, mut decreased, mut unchanged) = (0, 0, 0);
    for i in 0..k {
        for j in i + 1..k {
            match matrix[i][j].partial_cmp(&0.0) {
                Some(std::cmp::Ordering::Greater) => increased += 1,
                Some(std::cmp::Ordering::Less) => decreased += 1,
                _ => unchanged += 1,
            }
        }
    }
    let groups = match (before.groups, after.groups) {
        (Some(b), Some(a)) => Some(GroupSummary {
            within_hr: a.within_hr.zip(b.within_hr).map(|(a, b)| a - b),
            within_lr: a.within_lr.zip(b.within_lr).map(|(a, b)| a - b),
            between: a.between - b.between,
        }),
        _ => None,
    };
    Ok(AlignmentDelta { variant: before.variant, languages: before.languages.clone(), matrix, groups, increased, decreased, unchanged })
}

/// Reads a matrix CSV written by [`AlignmentReport::write_csv`].
pub fn read_alignment_csv<R: BufRead>(input: R, variant: CkaVariant) -> Result<AlignmentReport> {
    let mut lines = input.lines().filter(|l| !l.as_ref().is_ok_and(|l| l.starts_with('#') || l.trim().is_empty()));
    let header = lines.next().ok_or_else(|| Error::Schema("empty matrix file".to_string()))??;
    let languages: Vec<String> = header.split(',').skip(1).map(String::from).collect();
    let mut matrix = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let mut cols = line.split(',');
        let lang = cols.next().unwrap_or_default();
        if languages.get(i).map(String::as_str) != Some(lang) {
            return Err(Error::Schema(format!("row {} is {lang:?}, expected {:?}", i + 1, languages.get(i))));
        }
        let row = cols
            .map(|c| c.trim().parse::<f64>().map_err(|e| Error::Schema(format!("row {lang}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != languages.len() {
            return Err(Error::Schema(format!("row {lang} has {} values", row.len())));
        }
        matrix.push(row);
    }
    if matrix.len() != languages.len() {
        return Err(Error::Schema(format!("{} rows for {} languages", matrix.len(), languages.len())));
    }
    Ok(AlignmentReport { variant, languages, matrix, groups: None })
}

/// Errors unless every language has the Flores devtest row count.
pub fn check_flores_rows(corpora: &[(String, EmbeddingMatrix)]) -> Result<()> {
    for (lang, m) in corpora {
        if m.nrows() != FLORES_DEVTEST_ROWS {
            return Err(Error::Schema(format!("{lang}: {} rows, expected {FLORES_DEVTEST_ROWS}", m.nrows())));
        }
    }
    Ok(())
}
