//! User-model estimation from a partial preference ranking.
//!
//! The hidden utility is recovered by firefly search over raw weight and
//! evaluation genes; the fitness of a candidate model is the Spearman
//! correlation between the utilities it assigns to the ranked sample and the
//! sample's given order. Ordinal accuracy and cardinal inaccuracy score an
//! estimate against the ground truth.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, LinearAdditiveUtility, PartialPreferenceProfile};
use crate::error::{Error, Result};
use crate::meta::firefly::{firefly_optimize, FaParams};
use crate::par;

/// Ranks of `values` (1-based), ties getting the average of their positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite").then(a.cmp(&b)));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j share the same value
        let avg = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = avg;
        }
        i = j;
    }
    ranks
}

/// Spearman's ρ between two equally-long score vectors, ties resolved by
/// average ranks. Returns 0 when either side has no rank variance.
pub fn spearman_rho(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Config(format!(
            "rank vectors differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Config("need at least two ranks".into()));
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = ra.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        let dx = x - mean;
        let dy = y - mean;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Ok(0.0);
    }
    // identical and exactly reversed rankings must hit ±1 without rounding
    if var_a == var_b && cov == var_a {
        return Ok(1.0);
    }
    if var_a == var_b && cov == -var_a {
        return Ok(-1.0);
    }
    Ok(cov / (var_a * var_b).sqrt())
}

/// Outcome of a user-model estimation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimationReport {
    pub estimated: LinearAdditiveUtility,
    /// Spearman ρ between the estimate's ranking of B and the given order.
    pub rho_on_b: f64,
    /// Objective evaluations the search spent.
    pub evaluations_used: u64,
}

const WEIGHT_GENE_MIN: f64 = 0.01;

fn decode_genes(domain: &Domain, genes: &[f64]) -> LinearAdditiveUtility {
    let n = domain.issue_count();
    let weight_sum: f64 = genes[..n].iter().sum();
    let weights: Vec<f64> = genes[..n].iter().map(|g| g / weight_sum).collect();
    let mut evaluations = Vec::with_capacity(n);
    let mut offset = n;
    for issue in &domain.issues {
        let k = issue.values.len();
        let row = &genes[offset..offset + k];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let decoded = if max < 1e-12 {
            vec![1.0; k]
        } else {
            row.iter().map(|e| (e / max).clamp(0.0, 1.0)).collect()
        };
        evaluations.push(decoded);
        offset += k;
    }
    LinearAdditiveUtility::new(weights, evaluations).expect("decoded genes satisfy invariants")
}

/// Estimates the user model that best reproduces the profile's ranking.
/// The returned weights are positive and sum to one by construction.
pub fn estimate_user_model(
    domain: &Domain,
    profile: &PartialPreferenceProfile,
    fa: &FaParams,
) -> Result<EstimationReport> {
    if profile.len() < 2 {
        return Err(Error::Estimation(format!(
            "profile of {} bids cannot constrain a ranking",
            profile.len()
        )));
    }
    for bid in &profile.bids {
        domain.check_bid(bid)?;
    }
    let n = domain.issue_count();
    let eval_genes: usize = domain.issues.iter().map(|i| i.values.len()).sum();
    let dim = n + eval_genes;
    let mut bounds = vec![(WEIGHT_GENE_MIN, 1.0); n];
    bounds.extend(vec![(0.0, 1.0); eval_genes]);

    let given_order: Vec<f64> = (1..=profile.len()).map(|r| r as f64).collect();
    let evaluations = AtomicU64::new(0);
    let fitness = |genes: &[f64]| {
        evaluations.fetch_add(1, Ordering::Relaxed);
        let candidate = decode_genes(domain, genes);
        let scores: Vec<f64> = profile
            .bids
            .iter()
            .map(|b| candidate.utility(b).expect("profile bids are valid"))
            .collect();
        spearman_rho(&scores, &given_order).expect("equal lengths")
    };
    let (best_genes, best_fitness) = firefly_optimize(fitness, dim, &bounds, fa)?;
    Ok(EstimationReport {
        estimated: decode_genes(domain, &best_genes),
        rho_on_b: best_fitness,
        evaluations_used: evaluations.into_inner(),
    })
}

/// Fraction of strictly-ordered outcome pairs whose order the estimate
/// preserves; pairs tied under the truth are excluded. Vacuously 1 when the
/// truth ties everything.
pub fn ordinal_accuracy(
    estimated: &LinearAdditiveUtility,
    truth: &LinearAdditiveUtility,
    domain: &Domain,
) -> Result<f64> {
    let count = domain.outcome_count();
    if count < 2 {
        return Err(Error::Config("ordinal accuracy needs at least two outcomes".into()));
    }
    let pairs: Vec<(f64, f64)> = domain
        .enumerate()
        .map(|bid| (estimated.utility(&bid).unwrap_or(f64::NAN), truth.utility(&bid).unwrap_or(f64::NAN)))
        .collect();
    if pairs.iter().any(|(e, t)| !e.is_finite() || !t.is_finite()) {
        return Err(Error::InvalidUtility("model does not cover the domain".into()));
    }
    let tallies = par::map_indices(pairs.len(), |i| {
        let (ei, ti) = pairs[i];
        let mut preserved = 0u64;
        let mut comparable = 0u64;
        for &(ej, tj) in &pairs[i + 1..] {
            if ti == tj {
                continue;
            }
            comparable += 1;
            if (ti < tj && ei < ej) || (ti > tj && ei > ej) {
                preserved += 1;
            }
        }
        (preserved, comparable)
    });
    let (preserved, comparable) = tallies
        .into_iter()
        .fold((0u64, 0u64), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    if comparable == 0 {
        return Ok(1.0);
    }
    Ok(preserved as f64 / comparable as f64)
}

/// Σ over issue-value slots of |ŵ_i·ê_i(v) − w_i·e_i(v)|.
pub fn cardinal_inaccuracy(estimated: &LinearAdditiveUtility, truth: &LinearAdditiveUtility) -> f64 {
    assert_eq!(
        estimated.issue_count(),
        truth.issue_count(),
        "models must share the domain shape"
    );
    estimated
        .weights()
        .iter()
        .zip(estimated.evaluations())
        .zip(truth.weights().iter().zip(truth.evaluations()))
        .map(|((we, rowe), (wt, rowt))| {
            assert_eq!(rowe.len(), rowt.len(), "models must share the domain shape");
            rowe.iter()
                .zip(rowt)
                .map(|(e, t)| (we * e - wt * t).abs())
                .sum::<f64>()
        })
        .sum()
}
