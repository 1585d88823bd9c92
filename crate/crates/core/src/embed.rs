//! Dense-vector primitives: normalization, cosine geometry and thresholded
//! best-match retrieval.
//!
//! All arithmetic is `f64`. Non-finite entries are rejected when a [`Vector`]
//! or [`EmbeddingMatrix`] is built, so the operations below never see them.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norms below this are treated as zero.
pub const MIN_NORM: f64 = 1e-30;

/// A finite, non-empty embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Vector::new(values)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

impl AsRef<[f64]> for Vector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// N row vectors of one dimension, each tagged with a unique id.
///
/// Rows are stored contiguously in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f64>,
    row_ids: Vec<String>,
}

impl EmbeddingMatrix {
    pub fn new(rows: Vec<Vector>, row_ids: Vec<String>) -> Result<Self> {
        let dim = rows.first().map(Vector::dim).ok_or_else(|| {
            Error::InvalidMatrix("matrix needs at least one row".to_string())
        })?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in &rows {
            if row.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: row.dim() });
            }
            data.extend_from_slice(row.as_slice());
        }
        Self::from_flat(dim, data, row_ids)
    }

    /// Rows get ids `"0"`, `"1"`, ...
    pub fn from_rows(rows: Vec<Vector>) -> Result<Self> {
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::new(rows, ids)
    }

    pub fn from_flat(dim: usize, data: Vec<f64>, row_ids: Vec<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMatrix("dimension must be at least 1".to_string()));
        }
        if data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidMatrix(format!(
                "{} values do not form rows of dimension {dim}",
                data.len()
            )));
        }
        let n = data.len() / dim;
        if row_ids.len() != n {
            return Err(Error::InvalidMatrix(format!("{n} rows but {} ids", row_ids.len())));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &row_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidMatrix(format!("duplicate row id {id:?}")));
            }
        }
        Ok(Self { dim, data, row_ids })
    }

    pub fn nrows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn row_vector(&self, i: usize) -> Vector {
        Vector(self.row(i).to_vec())
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        let mut ids = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.row(i));
            ids.push(self.row_ids[i].clone());
        }
        Self::from_flat(self.dim, data, ids)
    }

    /// Applies `f` to every row, keeping ids.
    pub fn map_rows<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Result<Vector>,
    {
        let mut rows = Vec::with_capacity(self.nrows());
        for row in self.rows() {
            rows.push(f(row)?);
        }
        Self::new(rows, self.row_ids.clone())
    }
}

/// A retrieval hit: `candidate_index` is the row of the candidate matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub query_index: usize,
    pub candidate_index: usize,
    pub score: f64,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn l2_normalize(v: &Vector) -> Result<Vector> {
    normalize_slice(v.as_slice())
}

pub fn normalize_slice(v: &[f64]) -> Result<Vector> {
    let n = norm(v);
    if n < MIN_NORM || !n.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(Vector(v.iter().map(|x| x / n).collect()))
}

/// Cosine similarity over raw slices. Both inputs must be nonzero and of
/// equal length.
pub fn cosine_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    let na = norm(a);
    let nb = norm(b);
    if na < MIN_NORM || nb < MIN_NORM {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

pub fn cosine_similarity(a: &Vector, b: &Vector) -> Result<f64> {
    cosine_slices(a.as_slice(), b.as_slice())
}

pub fn cosine_distance(a: &Vector, b: &Vector) -> Result<f64> {
    Ok(1.0 - cosine_similarity(a, b)?)
}

/// Best-scoring candidate row if its cosine similarity strictly exceeds
/// `threshold`. Ties go to the lowest candidate index.
pub fn best_match(query: &Vector, candidates: &EmbeddingMatrix, threshold: f64) -> Result<Option<Match>> {
    best_match_slice(query.as_slice(), candidates, threshold, 0)
}

pub(crate) fn best_match_slice(
    query: &[f64],
    candidates: &EmbeddingMatrix,
    threshold: f64,
    query_index: usize,
) -> Result<Option<Match>> {
    if query.len() != candidates.dim() {
        return Err(Error::DimensionMismatch { expected: candidates.dim(), found: query.len() });
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, row) in candidates.rows().enumerate() {
        let s = cosine_slices(query, row)?;
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    Ok(best
        .filter(|&(_, s)| s > threshold)
        .map(|(candidate_index, score)| Match { query_index, candidate_index, score }))
}

/// Index of the maximum value; the first one wins on ties.
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}
