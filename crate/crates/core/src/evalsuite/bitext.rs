use std::collections::BTreeMap;

use rayon::prelude::*;

use super::EvalReport;
use crate::embed::{cosine_slices, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::providers::{embed_unique, EmbeddingProvider};

/// Fraction of query rows whose nearest candidate (max cosine, ties to the
/// lowest index) has the same row index.
pub fn retrieval_accuracy(queries: &EmbeddingMatrix, candidates: &EmbeddingMatrix) -> Result<f64> {
    if queries.dim() != candidates.dim() {
        return Err(Error::DimensionMismatch { expected: queries.dim(), found: candidates.dim() });
    }
    if queries.nrows() != candidates.nrows() {
        return Err(Error::RowCountMismatch { left: queries.nrows(), right: candidates.nrows() });
    }
    let hits: usize = (0..queries.nrows())
        .into_par_iter()
        .map(|i| {
            let q = queries.row(i);
            let mut best = (0usize, f64::NEG_INFINITY);
            for (j, c) in candidates.rows().enumerate() {
                let s = cosine_slices(q, c)?;
                if s > best.1 {
                    best = (j, s);
                }
            }
            Ok(usize::from(best.0 == i))
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum();
    Ok(hits as f64 / queries.nrows() as f64)
}

/// Retrieval accuracy in both directions over row-aligned matrices;
/// breakdown keys are `"{src}->{tgt}"` and `"{tgt}->{src}"`.
pub fn bitext_accuracy_named(src: &EmbeddingMatrix, tgt: &EmbeddingMatrix, src_name: &str, tgt_name: &str) -> Result<EvalReport> {
    if src.nrows() < 2 {
        return Err(Error::DegenerateInput(format!("bitext evaluation needs at least 2 pairs, got {}", src.nrows())));
    }
    let forward = retrieval_accuracy(src, tgt)?;
    let backward = retrieval_accuracy(tgt, src)?;
    let breakdown = BTreeMap::from([
        (format!("{src_name}->{tgt_name}"), forward),
        (format!("{tgt_name}->{src_name}"), backward),
    ]);
    EvalReport::new("bitext", breakdown)
}

pub fn bitext_accuracy(src: &EmbeddingMatrix, tgt: &EmbeddingMatrix) -> Result<EvalReport> {
    bitext_accuracy_named(src, tgt, "src", "tgt")
}

/// Embeds both sides of `pairs` and evaluates retrieval.
pub fn bitext_eval(
    pairs: &[(String, String)],
    provider: &dyn EmbeddingProvider,
    src_name: &str,
    tgt_name: &str,
) -> Result<EvalReport> {
    let src: Vec<String> = pairs.iter().map(|p| p.0.clone()).collect();
    let tgt: Vec<String> = pairs.iter().map(|p| p.1.clone()).collect();
    let report = bitext_accuracy_named(&embed_unique(provider, &src)?, &embed_unique(provider, &tgt)?, src_name, tgt_name)?;
    Ok(report.with_provider(provider.model_id()))
}

/// One report over several language pairs: the mean runs over every
/// direction of every pair.
pub fn merge_bitext_reports(reports: &[EvalReport]) -> Result<EvalReport> {
    let mut breakdown = BTreeMap::new();
    for r in reports {
        if r.task != "bitext" {
            return Err(Error::MismatchedReports(format!("expected bitext reports, got {:?}", r.task)));
        }
        for (k, &v) in &r.breakdown {
            if breakdown.insert(k.clone(), v).is_some() {
                return Err(Error::MismatchedReports(format!("direction {k} appears twice")));
            }
        }
    }
    let provider = reports.first().map(|r| r.provider.clone()).unwrap_or_default();
    Ok(EvalReport::new("bitext", breakdown)?.with_provider(provider))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::Vector;

    fn matrix(rows: &[&[f64]]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(rows.iter().map(|r| Vector::new(r.to_vec()).unwrap()).collect()).unwrap()
    }

    #[test]
    fn self_retrieval() {
        let x = matrix(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let r = bitext_accuracy(&x, &x).unwrap();
        assert_eq!(r.mean, 1.0);
        assert_eq!(r.breakdown["src->tgt"], 1.0);
    }

    #[test]
    fn hand_built_case() {
        // src row 2 is closest to tgt row 0
        let src = matrix(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.1]]);
        let tgt = matrix(&[&[1.0, 0.05], &[0.0, 1.0], &[0.6, 0.8]]);
        let forward = retrieval_accuracy(&src, &tgt).unwrap();
        assert!((forward - 2.0 / 3.0).abs() < 1e-15);
        // reverse direction against an enumeration oracle
        let backward = retrieval_accuracy(&tgt, &src).unwrap();
        let expected = (0..3)
            .filter(|&i| {
                let scores: Vec<f64> = (0..3).map(|j| cosine_slices(tgt.row(i), src.row(j)).unwrap()).collect();
                let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                scores.iter().position(|&s| s == best) == Some(i)
            })
            .count() as f64
            / 3.0;
        assert_eq!(backward, expected);
    }

    #[test]
    fn ties_resolve_to_lowest_index() {
        let src = matrix(&[&[1.0, 0.0], &[1.0, 0.0]]);
        let tgt = matrix(&[&[1.0, 0.0], &[1.0, 0.0]]);
        assert_eq!(retrieval_accuracy(&src, &tgt).unwrap(), 0.5);
    }

    #[test]
    fn shape_errors() {
        let a = matrix(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let b = matrix(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        let c = matrix(&[&[1.0, 0.0]]);
        assert!(matches!(bitext_accuracy(&a, &b), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(bitext_accuracy(&a, &c), Err(Error::RowCountMismatch { .. })));
    }

    #[test]
    fn merged_mean_covers_all_directions() {
        let x = matrix(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let y = matrix(&[&[1.0, 0.0], &[1.0, 0.0]]);
        let a = bitext_accuracy_named(&x, &x, "lb", "en").unwrap();
        let b = bitext_accuracy_named(&x, &y, "lb", "fr").unwrap();
        let m = merge_bitext_reports(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(m.breakdown.len(), 4);
        assert!((m.mean - (a.mean + b.mean) / 2.0).abs() < 1e-15);
        assert!(merge_bitext_reports(&[a.clone(), a]).is_err());
    }
}
