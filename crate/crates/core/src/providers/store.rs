//! Precomputed embeddings: a TSV file with columns `id`, `text` and a
//! base64-encoded little-endian `f32` vector.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;

use super::{validate_texts, EmbeddingProvider};
use crate::embed::{normalize_slice, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::tsv;

pub const VECTOR_TSV_HEADER: [&str; 3] = ["id", "text", "vector"];

#[derive(Debug, Clone, PartialEq)]
pub struct VectorRecord {
    pub id: String,
    pub text: String,
    pub vector: Vec<f32>,
}

pub fn encode_vector(values: &[f32]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode_vector(encoded: &str) -> Result<Vec<f32>> {
    let bytes = STANDARD
        .decode(encoded.trim())
        .map_err(|e| Error::Schema(format!("bad base64 vector: {e}")))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Schema(format!("vector byte length {} is not a multiple of 4", bytes.len())));
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn read_vector_tsv<R: BufRead>(input: R) -> Result<Vec<VectorRecord>> {
    tsv::read_records(input, Some(&VECTOR_TSV_HEADER), 3)?
        .into_iter()
        .map(|mut f| {
            let vector = decode_vector(&f[2])?;
            let text = std::mem::take(&mut f[1]);
            let id = std::mem::take(&mut f[0]);
            Ok(VectorRecord { id, text, vector })
        })
        .collect()
}

pub fn write_vector_tsv<W: Write>(out: &mut W, records: &[VectorRecord], config_hash: Option<&str>) -> Result<()> {
    tsv::write_hash_header(out, config_hash)?;
    tsv::write_record(out, &VECTOR_TSV_HEADER)?;
    for r in records {
        tsv::write_record(out, &[r.id.as_str(), r.text.as_str(), &encode_vector(&r.vector)])?;
    }
    Ok(())
}

/// File-backed provider: looks texts up in a loaded vector file.
#[derive(Debug, Clone)]
pub struct VectorStore {
    model_id: String,
    dim: usize,
    records: Vec<(String, String, Vec<f64>)>,
    by_text: HashMap<String, usize>,
}

impl VectorStore {
    pub fn from_records(model_id: impl Into<String>, records: Vec<VectorRecord>) -> Result<Self> {
        let dim = records
            .first()
            .map(|r| r.vector.len())
            .ok_or_else(|| Error::Schema("vector file has no records".to_string()))?;
        let mut rows = Vec::with_capacity(records.len());
        let mut by_text = HashMap::with_capacity(records.len());
        for (i, r) in records.into_iter().enumerate() {
            if r.vector.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: r.vector.len() });
            }
            let widened: Vec<f64> = r.vector.iter().map(|&x| f64::from(x)).collect();
            let unit = normalize_slice(&widened)?.into_inner();
            by_text.entry(r.text.clone()).or_insert(i);
            rows.push((r.id, r.text, unit));
        }
        Ok(Self { model_id: model_id.into(), dim, records: rows, by_text })
    }

    pub fn from_vectors(model_id: impl Into<String>, items: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let records = items
            .into_iter()
            .enumerate()
            .map(|(i, (text, v))| VectorRecord { id: i.to_string(), text, vector: v.iter().map(|&x| x as f32).collect() })
            .collect();
        Self::from_records(model_id, records)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let model_id = format!("file:{}", path.display());
        Self::from_records(model_id, read_vector_tsv(file)?)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|(_, t, _)| t.as_str())
    }

    /// All rows in file order, ids from the file.
    pub fn matrix(&self) -> Result<EmbeddingMatrix> {
        let data = self.records.iter().flat_map(|(_, _, v)| v.iter().copied()).collect();
        EmbeddingMatrix::from_flat(self.dim, data, self.records.iter().map(|(id, _, _)| id.clone()).collect())
    }
}

impl EmbeddingProvider for VectorStore {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn embed(&self, texts: &[String]) -> Result<EmbeddingMatrix> {
        validate_texts(texts)?;
        let mut data = Vec::with_capacity(texts.len() * self.dim);
        for t in texts {
            let i = *self.by_text.get(t).ok_or_else(|| Error::MissingEmbedding(t.clone()))?;
            data.extend_from_slice(&self.records[i].2);
        }
        EmbeddingMatrix::from_flat(self.dim, data, (0..texts.len()).map(|i| i.to_string()).collect())
    }
}
