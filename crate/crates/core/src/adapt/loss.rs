use serde::{Deserialize, Serialize};

use crate::embed::{dot, norm, Vector, MIN_NORM};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossParams {
    pub margin: f64,
    pub distance: Distance,
}

impl Default for LossParams {
    fn default() -> Self {
        Self { margin: 0.5, distance: Distance::Cosine }
    }
}

impl LossParams {
    pub fn validate(&self) -> Result<()> {
        if self.margin > 0.0 && self.margin <= 2.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("margin = {} is outside the allowed range (0, 2]", self.margin)))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveExample {
    pub x1: Vector,
    pub x2: Vector,
    /// 1 for a positive pair, 0 for a negative pair.
    pub y: u8,
}

impl ContrastiveExample {
    pub fn new(x1: Vector, x2: Vector, y: u8) -> Result<Self> {
        if y > 1 {
            return Err(Error::InvalidConfig(format!("label must be 0 or 1, got {y}")));
        }
        check(x1.as_slice(), x2.as_slice())?;
        Ok(Self { x1, x2, y })
    }

    pub fn is_positive(&self) -> bool {
        self.y == 1
    }
}

fn check(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    let (na, nb) = (norm(a), norm(b));
    if na < MIN_NORM || nb < MIN_NORM {
        return Err(Error::ZeroVector);
    }
    Ok((na, nb))
}

/// Loss over raw slices; `positive` selects the y = 1 branch.
pub fn loss_slices(a: &[f64], b: &[f64], positive: bool, p: &LossParams) -> Result<f64> {
    let (na, nb) = check(a, b)?;
    let d = 1.0 - (dot(a, b) / (na * nb)).clamp(-1.0, 1.0);
    Ok(if positive { 0.5 * d * d } else { 0.5 * (p.margin - d).max(0.0).powi(2) })
}

/// Gradients of the loss with respect to both raw (unnormalized) inputs.
/// At the hinge corner (negative pair, D = margin) the gradient is zero.
pub fn grad_slices(a: &[f64], b: &[f64], positive: bool, p: &LossParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let (na, nb) = check(a, b)?;
    let c = (dot(a, b) / (na * nb)).clamp(-1.0, 1.0);
    let d = 1.0 - c;
    // dL/dD
    let dl_dd = if positive {
        d
    } else if d < p.margin {
        -(p.margin - d)
    } else {
        0.0
    };
    if dl_dd == 0.0 {
        return Ok((vec![0.0; a.len()], vec![0.0; b.len()]));
    }
    // dD/da = -(b / (|a||b|) - c a / |a|^2), symmetric for b.
    let inv = 1.0 / (na * nb);
    let ga = a.iter().zip(b).map(|(&x, &y)| -dl_dd * (y * inv - c * x / (na * na))).collect();
    let gb = a.iter().zip(b).map(|(&x, &y)| -dl_dd * (x * inv - c * y / (nb * nb))).collect();
    Ok((ga, gb))
}

/// ½[y·D² + (1−y)·max(0, m−D)²] with D the cosine distance.
pub fn contrastive_loss(ex: &ContrastiveExample, p: &LossParams) -> Result<f64> {
    loss_slices(ex.x1.as_slice(), ex.x2.as_slice(), ex.is_positive(), p)
}

pub fn contrastive_loss_grad(ex: &ContrastiveExample, p: &LossParams) -> Result<(Vec<f64>, Vec<f64>)> {
    grad_slices(ex.x1.as_slice(), ex.x2.as_slice(), ex.is_positive(), p)
}
