use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embed::{dot, EmbeddingMatrix};
use crate::error::{Error, Result};

/// Above this many rows the feature-space (m x m) products are used.
pub const SAMPLE_GRAM_LIMIT: usize = 4096;

/// Which linear-kernel CKA expression to evaluate. All are dissimilarities:
/// 0 for identical inputs, at most 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CkaVariant {
    /// `1 - <XX^T, YY^T>_F / (|XX^T|_F |YY^T|_F)` on the raw rows.
    Paper,
    /// Same expression after column-mean centering (standard linear CKA).
    Centered,
    /// `1 - |XY^T|_F^2 / (|XX^T|_F |YY^T|_F)` with the N x N cross product
    /// taken literally. Not invariant to rotating only one side.
    Literal,
}

impl CkaVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            CkaVariant::Paper => "paper",
            CkaVariant::Centered => "centered",
            CkaVariant::Literal => "literal",
        }
    }
}

impl fmt::Display for CkaVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CkaVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(CkaVariant::Paper),
            "centered" => Ok(CkaVariant::Centered),
            "literal" => Ok(CkaVariant::Literal),
            other => Err(Error::InvalidConfig(format!("cka variant {other:?}, must be paper, centered or literal"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramRoute {
    /// N x N sample Gram matrices.
    Samples,
    /// m x m feature products.
    Features,
    /// Samples when N <= [`SAMPLE_GRAM_LIMIT`], else features.
    Auto,
}

// Inputs are n x m row-major: `a b^T` (n x n) and `a^T b` (m x m).
fn row_products(a: &[f64], b: &[f64], n: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = dot(&a[i * m..(i + 1) * m], &b[j * m..(j + 1) * m]);
        }
    }
    out
}

fn col_products(a: &[f64], b: &[f64], n: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * m];
    for r in 0..n {
        let (ar, br) = (&a[r * m..(r + 1) * m], &b[r * m..(r + 1) * m]);
        for i in 0..m {
            let ai = ar[i];
            if ai == 0.0 {
                continue;
            }
            out[i * m..(i + 1) * m].iter_mut().zip(br).for_each(|(o, bj)| *o += ai * bj);
        }
    }
    out
}

fn frob(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn centered(a: &[f64], n: usize, m: usize) -> Vec<f64> {
    let mut mean = vec![0.0; m];
    for row in a.chunks_exact(m) {
        mean.iter_mut().zip(row).for_each(|(s, x)| *s += x);
    }
    mean.iter_mut().for_each(|s| *s /= n as f64);
    a.chunks_exact(m).flat_map(|row| row.iter().zip(&mean).map(|(x, mu)| x - mu)).collect()
}

pub fn cka(x: &EmbeddingMatrix, y: &EmbeddingMatrix, variant: CkaVariant) -> Result<f64> {
    cka_via(x, y, variant, GramRoute::Auto)
}

/// [`cka`] with an explicit choice of product route; both routes give the
/// same value up to rounding.
pub fn cka_via(x: &EmbeddingMatrix, y: &EmbeddingMatrix, variant: CkaVariant, route: GramRoute) -> Result<f64> {
    if x.nrows() != y.nrows() {
        return Err(Error::RowCountMismatch { left: x.nrows(), right: y.nrows() });
    }
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), found: y.dim() });
    }
    let (n, m) = (x.nrows(), x.dim());
    if n < 2 {
        return Err(Error::DegenerateInput(format!("cka needs at least 2 rows, got {n}")));
    }
    let (xs, ys) = match variant {
        CkaVariant::Centered => (centered(x.as_flat(), n, m), centered(y.as_flat(), n, m)),
        _ => (x.as_flat().to_vec(), y.as_flat().to_vec()),
    };
    let samples = match route {
        GramRoute::Samples => true,
        GramRoute::Features => false,
        GramRoute::Auto => n <= SAMPLE_GRAM_LIMIT,
    };
    let (num, nx, ny) = if samples {
        let kx = row_products(&xs, &xs, n, m);
        let ky = row_products(&ys, &ys, n, m);
        let num = match variant {
            CkaVariant::Literal => {
                let c = row_products(&xs, &ys, n, m);
                dot(&c, &c)
            }
            _ => dot(&kx, &ky),
        };
        (num, frob(&kx), frob(&ky))
    } else {
        let gx = col_products(&xs, &xs, n, m);
        let gy = col_products(&ys, &ys, n, m);
        let num = match variant {
            CkaVariant::Literal => dot(&gx, &gy),
            _ => {
                let c = col_products(&xs, &ys, n, m);
                dot(&c, &c)
            }
        };
        (num, frob(&gx), frob(&gy))
    };
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::DegenerateInput("all-zero Gram matrix".to_string()));
    }
    // the ratio is at most 1 by Cauchy-Schwarz; rounding can overshoot
    Ok((1.0 - num / (nx * ny)).clamp(0.0, 1.0))
}
