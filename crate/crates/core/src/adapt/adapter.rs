use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::embed::{normalize_slice, EmbeddingMatrix, Vector};
use crate::error::{Error, Result};
use crate::providers::{decode_vector, encode_vector, EmbeddingProvider};

/// Linear map `v -> normalize(W v + b)` applied to both sides of a pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Adapter {
    dim: usize,
    /// Row-major `dim x dim`.
    weight: Vec<f64>,
    bias: Option<Vec<f64>>,
}

impl Adapter {
    pub fn identity(dim: usize) -> Self {
        let mut weight = vec![0.0; dim * dim];
        for i in 0..dim {
            weight[i * dim + i] = 1.0;
        }
        Self { dim, weight, bias: Some(vec![0.0; dim]) }
    }

    pub fn new(dim: usize, weight: Vec<f64>, bias: Option<Vec<f64>>) -> Result<Self> {
        if dim == 0 || weight.len() != dim * dim {
            return Err(Error::InvalidMatrix(format!("weight must be {dim}x{dim}")));
        }
        if let Some(i) = weight.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if let Some(b) = &bias {
            if b.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: b.len() });
            }
            if let Some(i) = b.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite(i));
            }
        }
        Ok(Self { dim, weight, bias })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn bias(&self) -> Option<&[f64]> {
        self.bias.as_deref()
    }

    pub(crate) fn weight_mut(&mut self) -> &mut [f64] {
        &mut self.weight
    }

    pub(crate) fn bias_mut(&mut self) -> &mut Vec<f64> {
        self.bias.get_or_insert_with(|| vec![0.0; self.dim])
    }

    /// `W v + b` without normalization.
    pub fn affine(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: v.len() });
        }
        let mut out: Vec<f64> = self.weight.chunks_exact(self.dim).map(|row| crate::embed::dot(row, v)).collect();
        if let Some(b) = &self.bias {
            out.iter_mut().zip(b).for_each(|(o, b)| *o += b);
        }
        Ok(out)
    }

    /// Frobenius distance to the identity map (bias included).
    pub fn distance_from_identity(&self) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let target = if i == j { 1.0 } else { 0.0 };
                sum += (self.weight[i * self.dim + j] - target).powi(2);
            }
        }
        if let Some(b) = &self.bias {
            sum += b.iter().map(|x| x * x).sum::<f64>();
        }
        sum.sqrt()
    }

    pub fn apply_matrix(&self, m: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        m.map_rows(|row| normalize_slice(&self.affine(row)?))
    }
}

/// `l2_normalize(W v + b)`.
pub fn apply_adapter(adapter: &Adapter, v: &Vector) -> Result<Vector> {
    normalize_slice(&adapter.affine(v.as_slice())?)
}

/// Wraps a provider so every returned row passes through the adapter.
pub struct AdaptedProvider<P> {
    inner: P,
    adapter: Adapter,
    model_id: String,
}

impl<P: EmbeddingProvider> AdaptedProvider<P> {
    pub fn new(inner: P, adapter: Adapter) -> Self {
        let model_id = format!("{}+adapter", inner.model_id());
        Self { inner, adapter, model_id }
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for AdaptedProvider<P> {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn embed(&self, texts: &[String]) -> Result<EmbeddingMatrix> {
        self.adapter.apply_matrix(&self.inner.embed(texts)?)
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
    dimension: usize,
    seed: u64,
    config: TrainConfig,
    weight: String,
    bias: Option<String>,
}

fn to_f32(values: &[f64]) -> Vec<f32> {
    values.iter().map(|&x| x as f32).collect()
}

impl Adapter {
    /// JSON checkpoint: header fields plus base64 little-endian f32 weight
    /// (row-major) and bias.
    pub fn to_checkpoint_json(&self, config: &TrainConfig, config_hash: Option<&str>) -> Result<String> {
        let file = CheckpointFile {
            config_hash: config_hash.map(String::from),
            dimension: self.dim,
            seed: config.seed,
            config: config.clone(),
            weight: encode_vector(&to_f32(&self.weight)),
            bias: self.bias.as_deref().map(|b| encode_vector(&to_f32(b))),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_checkpoint_json(text: &str) -> Result<(Self, TrainConfig)> {
        let file: CheckpointFile = serde_json::from_str(text)?;
        let widen = |v: Vec<f32>| v.into_iter().map(f64::from).collect::<Vec<f64>>();
        let weight = widen(decode_vector(&file.weight)?);
        let bias = file.bias.as_deref().map(decode_vector).transpose()?.map(widen);
        Ok((Self::new(file.dimension, weight, bias)?, file.config))
    }

    pub fn save(&self, path: &Path, config: &TrainConfig, config_hash: Option<&str>) -> Result<()> {
        std::fs::write(path, self.to_checkpoint_json(config, config_hash)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Self, TrainConfig)> {
        Self::from_checkpoint_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_and_scaled_identity() {
        let v = Vector::new(vec![0.6, 0.8, 0.0]).unwrap();
        assert_eq!(apply_adapter(&Adapter::identity(3), &v).unwrap(), v);
        let mut w = vec![0.0; 9];
        for i in 0..3 {
            w[i * 3 + i] = 2.0;
        }
        let a = Adapter::new(3, w, None).unwrap();
        let out = apply_adapter(&a, &v).unwrap();
        for (x, y) in out.as_slice().iter().zip(v.as_slice()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_output_and_mismatch() {
        let a = Adapter::new(2, vec![0.0; 4], None).unwrap();
        assert!(matches!(apply_adapter(&a, &Vector::new(vec![1.0, 0.0]).unwrap()), Err(Error::ZeroVector)));
        let v = Vector::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(apply_adapter(&a, &v), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn checkpoint_round_trip() {
        let a = Adapter::new(2, vec![1.5, -0.25, 0.125, 2.0], Some(vec![0.5, -1.0])).unwrap();
        let cfg = TrainConfig::default();
        let json = a.to_checkpoint_json(&cfg, Some("abc")).unwrap();
        let (b, cfg2) = Adapter::from_checkpoint_json(&json).unwrap();
        assert_eq!(a, b);
        assert_eq!(cfg, cfg2);
        assert!(json.contains("\"dimension\": 2"));
        assert!(json.trim_start().starts_with("{\n  \"config_hash\": \"abc\""));
    }

    proptest! {
        #[test]
        fn output_is_unit(w in proptest::collection::vec(-3.0f64..3.0, 16), v in proptest::collection::vec(-1.0f64..1.0, 4)) {
            let a = Adapter::new(4, w, None).unwrap();
            prop_assume!(crate::embed::norm(&v) > 1e-3);
            if let Ok(out) = apply_adapter(&a, &Vector::new(v).unwrap()) {
                prop_assert!((out.norm() - 1.0).abs() < 1e-12);
            }
        }
    }
}
