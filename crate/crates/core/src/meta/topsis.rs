//! TOPSIS ranking over benefit criteria: vector-normalize each column,
//! weight, then rank alternatives by relative closeness to the ideal point.

use std::cmp::Ordering;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TopsisRanking {
    /// Alternative indices, best first; ties broken by lower index.
    pub order: Vec<usize>,
    /// Relative closeness per alternative (input order), in \[0,1\].
    pub closeness: Vec<f64>,
}

/// Ranks an m×k matrix of benefit criteria. `weights` must sum to 1.
pub fn topsis(alternatives: &[Vec<f64>], weights: &[f64]) -> Result<TopsisRanking> {
    let m = alternatives.len();
    if m == 0 {
        return Err(Error::Config("topsis needs at least one alternative".into()));
    }
    let k = weights.len();
    if k == 0 {
        return Err(Error::Config("topsis needs at least one criterion".into()));
    }
    if alternatives.iter().any(|row| row.len() != k) {
        return Err(Error::Config("ragged criteria matrix".into()));
    }
    let wsum: f64 = weights.iter().sum();
    if (wsum - 1.0).abs() > 1e-6 || weights.iter().any(|w| *w < 0.0) {
        return Err(Error::Config(format!("criterion weights must be nonnegative and sum to 1, got {wsum}")));
    }
    if m == 1 {
        // single alternative coincides with its own ideal
        return Ok(TopsisRanking { order: vec![0], closeness: vec![1.0] });
    }

    let mut weighted = vec![vec![0.0f64; k]; m];
    for j in 0..k {
        let norm: f64 = alternatives.iter().map(|row| row[j] * row[j]).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::DegenerateCriterion(format!("criterion {j} is all-zero")));
        }
        for (wrow, row) in weighted.iter_mut().zip(alternatives) {
            wrow[j] = row[j] / norm * weights[j];
        }
    }

    let ideal: Vec<f64> = (0..k)
        .map(|j| weighted.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let anti: Vec<f64> = (0..k)
        .map(|j| weighted.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min))
        .collect();

    let closeness: Vec<f64> = weighted
        .iter()
        .map(|row| {
            let dp: f64 = row.iter().zip(&ideal).map(|(v, i)| (v - i) * (v - i)).sum::<f64>().sqrt();
            let dn: f64 = row.iter().zip(&anti).map(|(v, a)| (v - a) * (v - a)).sum::<f64>().sqrt();
            if dp + dn == 0.0 {
                1.0
            } else {
                dn / (dp + dn)
            }
        })
        .collect();

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        closeness[b].partial_cmp(&closeness[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });
    Ok(TopsisRanking { order, closeness })
}
