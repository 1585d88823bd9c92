use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{validate_texts, EmbeddingProvider};
use crate::embed::{normalize_slice, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::hashing::text_hash;
use crate::tsv;

/// Separates the noise stream from the base stream when key == text.
const NOISE_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Deterministic offline embedding model.
///
/// A text's vector is `normalize(base(key) + noise_scale * noise(text))`,
/// where `key` is the text's concept key (or the text itself) and both
/// components are unit vectors drawn from a ChaCha8 stream seeded by the
/// stable hash of their input. Only IEEE-exact operations are involved, so
/// outputs are bit-identical everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockSpec {
    pub dimension: usize,
    #[serde(default)]
    pub noise_scale: f64,
    #[serde(default)]
    pub concept_map: Option<HashMap<String, String>>,
}

impl MockSpec {
    pub fn new(dimension: usize, noise_scale: f64) -> Self {
        Self { dimension, noise_scale, concept_map: None }
    }

    pub fn with_concepts(mut self, concept_map: HashMap<String, String>) -> Self {
        self.concept_map = Some(concept_map);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension < 2 {
            return Err(Error::InvalidConfig(format!("mock dimension must be >= 2, got {}", self.dimension)));
        }
        if !(0.0..1.0).contains(&self.noise_scale) {
            return Err(Error::InvalidConfig(format!(
                "mock noise_scale must be in [0, 1), got {}",
                self.noise_scale
            )));
        }
        Ok(())
    }

    fn key<'a>(&'a self, text: &'a str) -> &'a str {
        self.concept_map
            .as_ref()
            .and_then(|m| m.get(text))
            .map(String::as_str)
            .unwrap_or(text)
    }
}

fn unit_from_seed(seed: u64, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
        if let Ok(u) = normalize_slice(&v) {
            return u.into_inner();
        }
    }
}

pub(crate) fn mock_vector(text: &str, spec: &MockSpec) -> Vec<f64> {
    let base = unit_from_seed(text_hash(spec.key(text)), spec.dimension);
    if spec.noise_scale == 0.0 {
        return base;
    }
    let noise = unit_from_seed(text_hash(text) ^ NOISE_SALT, spec.dimension);
    let mixed: Vec<f64> = base.iter().zip(&noise).map(|(b, n)| b + spec.noise_scale * n).collect();
    // noise_scale < 1 keeps the sum away from zero
    normalize_slice(&mixed).expect("nonzero mock vector").into_inner()
}

pub fn mock_embed(texts: &[String], spec: &MockSpec) -> Result<EmbeddingMatrix> {
    spec.validate()?;
    validate_texts(texts)?;
    let mut data = Vec::with_capacity(texts.len() * spec.dimension);
    for t in texts {
        data.extend(mock_vector(t, spec));
    }
    EmbeddingMatrix::from_flat(spec.dimension, data, (0..texts.len()).map(|i| i.to_string()).collect())
}

#[derive(Debug, Clone)]
pub struct MockEmbedder {
    spec: MockSpec,
    model_id: String,
}

impl MockEmbedder {
    pub fn new(spec: MockSpec) -> Result<Self> {
        spec.validate()?;
        let model_id = format!("mock-d{}-n{}", spec.dimension, spec.noise_scale);
        Ok(Self { spec, model_id })
    }

    pub fn spec(&self) -> &MockSpec {
        &self.spec
    }
}

impl EmbeddingProvider for MockEmbedder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn embed(&self, texts: &[String]) -> Result<EmbeddingMatrix> {
        mock_embed(texts, &self.spec)
    }
}

pub const CONCEPT_HEADER: [&str; 2] = ["text", "concept"];

/// Reads a `text<TAB>concept` file into a concept map.
pub fn read_concept_tsv<R: BufRead>(input: R) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for r in tsv::read_records(input, Some(&CONCEPT_HEADER), CONCEPT_HEADER.len())? {
        let [text, concept]: [String; 2] = r.try_into().expect("column count checked");
        if let Some(prev) = map.insert(text.clone(), concept.clone()) {
            if prev != concept {
                return Err(Error::Schema(format!("text {text:?} has two concepts")));
            }
        }
    }
    Ok(map)
}

/// Writes a concept map sorted by text.
pub fn write_concept_tsv<W: Write>(out: &mut W, map: &HashMap<String, String>, config_hash: Option<&str>) -> Result<()> {
    let mut rows: Vec<(&String, &String)> = map.iter().collect();
    rows.sort();
    tsv::write_hash_header(out, config_hash)?;
    tsv::write_record(out, &CONCEPT_HEADER)?;
    for (text, concept) in rows {
        tsv::write_record(out, &[text, concept])?;
    }
    Ok(())
}
