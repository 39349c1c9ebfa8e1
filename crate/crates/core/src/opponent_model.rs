//! Distribution-based frequency estimate of the opponent's utility.
//!
//! Value scores come from empirical frequencies of the opponent's chosen
//! values (scaled so the modal value scores 1), and issue weights grow for
//! issues whose modal value stays stable across disjoint bid windows.
//! Unobserved issues score 1 everywhere: an optimistic prior that avoids
//! writing off bids early in a session.

use serde::{Deserialize, Serialize};

use crate::domain::{Bid, Domain};
use crate::error::{Error, Result};

/// Weight increment for issues with a stable modal value, applied before
/// renormalization.
const STABILITY_INCREMENT: f64 = 0.1;

/// Default number of bids per analysis window.
pub const DEFAULT_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyModel {
    counts: Vec<Vec<u64>>,
    weights: Vec<f64>,
    window: usize,
    history: Vec<Bid>,
    weight_version: u64,
}

impl FrequencyModel {
    pub fn new(domain: &Domain, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        let n = domain.issue_count();
        Ok(FrequencyModel {
            counts: domain.issues.iter().map(|i| vec![0; i.values.len()]).collect(),
            weights: vec![1.0 / n as f64; n],
            window,
            history: Vec::new(),
            weight_version: 0,
        })
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Bumped whenever `update_weights` actually changes the weights; lets
    /// callers cache anything derived from them.
    pub fn weight_version(&self) -> u64 {
        self.weight_version
    }

    /// Records one opponent bid.
    pub fn observe(&mut self, bid: &Bid) -> Result<()> {
        if bid.choices.len() != self.counts.len() {
            return Err(Error::InvalidBid(format!(
                "bid has {} choices, model expects {}",
                bid.choices.len(),
                self.counts.len()
            )));
        }
        for (issue, &choice) in bid.choices.iter().enumerate() {
            let row = &mut self.counts[issue];
            if choice >= row.len() {
                return Err(Error::InvalidBid(format!(
                    "choice {choice} out of range for issue {issue}"
                )));
            }
            row[choice] += 1;
        }
        self.history.push(bid.clone());
        Ok(())
    }

    /// count(v) / max count in the issue; 1 everywhere while the issue is
    /// unobserved.
    pub fn value_score(&self, issue: usize, value: usize) -> f64 {
        let row = &self.counts[issue];
        let max = row.iter().copied().max().unwrap_or(0);
        if max == 0 {
            return 1.0;
        }
        row[value] as f64 / max as f64
    }

    fn modal_value(window: &[Bid], issue: usize, width: usize) -> usize {
        let mut tally = vec![0u64; width];
        for bid in window {
            tally[bid.choices[issue]] += 1;
        }
        let mut best = 0;
        for (v, &c) in tally.iter().enumerate() {
            if c > tally[best] {
                best = v;
            }
        }
        best
    }

    /// Compares the modal value of each issue between the last two disjoint
    /// windows and rewards unchanged issues. No-op until two full windows
    /// of history exist.
    pub fn update_weights(&mut self) {
        let len = self.history.len();
        if len < 2 * self.window {
            return;
        }
        let older = &self.history[len - 2 * self.window..len - self.window];
        let newer = &self.history[len - self.window..];
        let old_weights = self.weights.clone();
        for issue in 0..self.counts.len() {
            let width = self.counts[issue].len();
            if Self::modal_value(older, issue, width) == Self::modal_value(newer, issue, width) {
                self.weights[issue] += STABILITY_INCREMENT;
            }
        }
        let sum: f64 = self.weights.iter().sum();
        self.weights.iter_mut().for_each(|w| *w /= sum);
        if self
            .weights
            .iter()
            .zip(&old_weights)
            .any(|(a, b)| (a - b).abs() > 1e-15)
        {
            self.weight_version += 1;
        }
    }

    /// Û_o(ω) = Σ_i weight_i · value_score_i(ω).
    pub fn utility(&self, bid: &Bid) -> Result<f64> {
        if bid.choices.len() != self.counts.len() {
            return Err(Error::InvalidBid(format!(
                "bid has {} choices, model expects {}",
                bid.choices.len(),
                self.counts.len()
            )));
        }
        Ok(bid
            .choices
            .iter()
            .enumerate()
            .map(|(issue, &choice)| self.weights[issue] * self.value_score(issue, choice))
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::testutil::toy_domain;
    use rand::Rng as _;

    #[test]
    fn first_observation_counts_once() {
        let domain = toy_domain(&[3, 2]);
        let mut m = FrequencyModel::new(&domain, 5).unwrap();
        m.observe(&Bid::new(vec![1, 0])).unwrap();
        assert_eq!(m.value_score(0, 1), 1.0);
        assert_eq!(m.value_score(0, 0), 0.0);
        assert_eq!(m.value_score(1, 0), 1.0);
    }

    #[test]
    fn repeated_bid_and_mixed_tallies() {
        let domain = toy_domain(&[3]);
        let mut m = FrequencyModel::new(&domain, 5).unwrap();
        for _ in 0..4 {
            m.observe(&Bid::new(vec![0])).unwrap();
        }
        for _ in 0..2 {
            m.observe(&Bid::new(vec![1])).unwrap();
        }
        // counts (4,2,0) → scores (1.0, 0.5, 0.0)
        assert_eq!(m.value_score(0, 0), 1.0);
        assert_eq!(m.value_score(0, 1), 0.5);
        assert_eq!(m.value_score(0, 2), 0.0);
    }

    #[test]
    fn shared_max_scores_one_for_both() {
        let domain = toy_domain(&[2]);
        let mut m = FrequencyModel::new(&domain, 5).unwrap();
        for v in [0, 1, 0, 1] {
            m.observe(&Bid::new(vec![v])).unwrap();
        }
        assert_eq!(m.value_score(0, 0), 1.0);
        assert_eq!(m.value_score(0, 1), 1.0);
    }

    #[test]
    fn unobserved_issue_is_optimistic() {
        let domain = toy_domain(&[2, 2]);
        let m = FrequencyModel::new(&domain, 5).unwrap();
        assert_eq!(m.value_score(1, 0), 1.0);
        assert_eq!(m.utility(&Bid::new(vec![1, 1])).unwrap(), 1.0);
    }

    #[test]
    fn modal_bid_scores_one() {
        let domain = toy_domain(&[3, 3]);
        let mut m = FrequencyModel::new(&domain, 5).unwrap();
        for _ in 0..3 {
            m.observe(&Bid::new(vec![2, 1])).unwrap();
        }
        m.observe(&Bid::new(vec![0, 0])).unwrap();
        assert_eq!(m.utility(&Bid::new(vec![2, 1])).unwrap(), 1.0);
        let mixed = m.utility(&Bid::new(vec![2, 0])).unwrap();
        let expected = 0.5 * 1.0 + 0.5 * (1.0 / 3.0);
        assert!((mixed - expected).abs() < 1e-12);
    }

    #[test]
    fn stable_opponent_keeps_weights_uniform() {
        let domain = toy_domain(&[3, 3, 3]);
        let mut m = FrequencyModel::new(&domain, 4).unwrap();
        for _ in 0..16 {
            m.observe(&Bid::new(vec![1, 1, 1])).unwrap();
            m.update_weights();
        }
        for w in m.weights() {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
        assert_eq!(m.weight_version(), 0, "uniform increments leave weights unchanged");
    }

    #[test]
    fn short_history_is_a_noop() {
        let domain = toy_domain(&[2, 2]);
        let mut m = FrequencyModel::new(&domain, 10).unwrap();
        for _ in 0..19 {
            m.observe(&Bid::new(vec![0, 1])).unwrap();
        }
        let before = m.weights().to_vec();
        // 19 < 2 * 10
        m.update_weights();
        assert_eq!(m.weights(), &before[..]);
    }

    #[test]
    fn fixed_issue_gains_the_largest_weight() {
        let domain = toy_domain(&[4, 4, 4]);
        let mut m = FrequencyModel::new(&domain, DEFAULT_WINDOW).unwrap();
        let mut rng = rng::seeded(8);
        for step in 1..=80 {
            // issue 0 pinned, issues 1 and 2 shuffled every bid
            let bid = Bid::new(vec![2, rng.gen_range(0..4), rng.gen_range(0..4)]);
            m.observe(&bid).unwrap();
            if step % DEFAULT_WINDOW == 0 {
                m.update_weights();
            }
        }
        let w = m.weights();
        assert!(
            w[0] > w[1] && w[0] > w[2],
            "pinned issue should dominate: {w:?}"
        );
        assert!(m.weight_version() >= 3);
    }

    #[test]
    fn weights_stay_a_simplex_and_scores_stay_unit() {
        let domain = toy_domain(&[3, 5, 2]);
        let mut m = FrequencyModel::new(&domain, 3).unwrap();
        let mut rng = rng::seeded(9);
        for step in 1..=60 {
            m.observe(&domain.random_bid(&mut rng)).unwrap();
            if step % 3 == 0 {
                m.update_weights();
            }
            let sum: f64 = m.weights().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            let u = m.utility(&domain.random_bid(&mut rng)).unwrap();
            assert!((0.0..=1.0 + 1e-12).contains(&u));
        }
    }

    #[test]
    fn counts_are_order_insensitive() {
        let domain = toy_domain(&[3, 3]);
        let bids = [
            Bid::new(vec![0, 1]),
            Bid::new(vec![2, 1]),
            Bid::new(vec![0, 0]),
            Bid::new(vec![1, 2]),
        ];
        let mut forward = FrequencyModel::new(&domain, 5).unwrap();
        let mut backward = FrequencyModel::new(&domain, 5).unwrap();
        for b in &bids {
            forward.observe(b).unwrap();
        }
        for b in bids.iter().rev() {
            backward.observe(b).unwrap();
        }
        for issue in 0..2 {
            for value in 0..3 {
                assert_eq!(forward.value_score(issue, value), backward.value_score(issue, value));
            }
        }
    }
}
