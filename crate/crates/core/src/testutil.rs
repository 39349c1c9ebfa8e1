//! Shared helpers for unit tests.

use rand::Rng as _;

use crate::domain::{Domain, Issue, LinearAdditiveUtility};
use crate::rng;

/// Domain with the given per-issue value counts and synthetic labels.
pub(crate) fn toy_domain(counts: &[usize]) -> Domain {
    let issues = counts
        .iter()
        .enumerate()
        .map(|(i, &k)| Issue {
            name: format!("issue{i}"),
            values: (0..k).map(|v| format!("v{v}")).collect(),
        })
        .collect();
    Domain::new("toy", issues).unwrap()
}

/// Random valid utility model for `domain`, deterministic per seed.
pub(crate) fn uniformish_utility(domain: &Domain, seed: u64) -> LinearAdditiveUtility {
    let mut rng = rng::seeded(seed);
    let raw: Vec<f64> = (0..domain.issue_count()).map(|_| rng.gen_range(0.1..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / sum).collect();
    let evals = domain
        .issues
        .iter()
        .map(|issue| {
            let mut row: Vec<f64> =
                (0..issue.values.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.iter_mut().for_each(|e| *e /= max);
            row
        })
        .collect();
    LinearAdditiveUtility::new(weights, evals).unwrap()
}
