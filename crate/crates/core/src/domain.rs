//! Discrete negotiation domains, bids, linear additive utilities and partial
//! preference profiles, plus their on-disk JSON formats.
//!
//! A domain is an ordered list of issues, each with a finite list of value
//! labels. A bid picks one value index per issue. Utilities are weighted sums
//! of per-issue evaluations; weights sum to one and each issue's evaluation
//! peaks at exactly 1.0.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// One negotiable issue: a name and its discrete value labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub name: String,
    pub values: Vec<String>,
}

/// A negotiation domain: the ordered issues spanning the outcome space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub name: String,
    pub issues: Vec<Issue>,
}

impl Domain {
    /// Validates and builds a domain.
    pub fn new(name: impl Into<String>, issues: Vec<Issue>) -> Result<Self> {
        let domain = Domain { name: name.into(), issues };
        domain.validate()?;
        Ok(domain)
    }

    fn validate(&self) -> Result<()> {
        if self.issues.is_empty() {
            return Err(Error::InvalidDomain("domain needs at least one issue".into()));
        }
        let mut issue_names = BTreeSet::new();
        for issue in &self.issues {
            if !issue_names.insert(issue.name.as_str()) {
                return Err(Error::InvalidDomain(format!(
                    "duplicate issue name {:?}",
                    issue.name
                )));
            }
            if issue.values.is_empty() {
                return Err(Error::InvalidDomain(format!(
                    "issue {:?} has no values",
                    issue.name
                )));
            }
            let mut labels = BTreeSet::new();
            for value in &issue.values {
                if !labels.insert(value.as_str()) {
                    return Err(Error::InvalidDomain(format!(
                        "duplicate value {:?} in issue {:?}",
                        value, issue.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn issue_count(&self) -> usize {
        self.issues.len()
    }

    /// |Ω|: the number of distinct bids.
    pub fn outcome_count(&self) -> u64 {
        self.issues
            .iter()
            .fold(1u64, |acc, issue| acc.saturating_mul(issue.values.len() as u64))
    }

    /// All bids, ascending in lexicographic index order (last issue fastest).
    pub fn enumerate(&self) -> impl Iterator<Item = Bid> + '_ {
        let count = self.outcome_count();
        (0..count).map(move |idx| self.bid_at(idx))
    }

    /// Decodes a linear index into a bid (mixed-radix, last issue least
    /// significant).
    pub fn bid_at(&self, mut index: u64) -> Bid {
        let mut choices = vec![0usize; self.issues.len()];
        for (slot, issue) in choices.iter_mut().zip(&self.issues).rev() {
            let k = issue.values.len() as u64;
            *slot = (index % k) as usize;
            index /= k;
        }
        Bid { choices }
    }

    /// Linear index of a valid bid; inverse of [`Domain::bid_at`].
    pub fn index_of(&self, bid: &Bid) -> Result<u64> {
        self.check_bid(bid)?;
        let mut index = 0u64;
        for (choice, issue) in bid.choices.iter().zip(&self.issues) {
            index = index * issue.values.len() as u64 + *choice as u64;
        }
        Ok(index)
    }

    /// Errors unless `bid` has one in-range choice per issue.
    pub fn check_bid(&self, bid: &Bid) -> Result<()> {
        if bid.choices.len() != self.issues.len() {
            return Err(Error::InvalidBid(format!(
                "bid has {} choices, domain {:?} has {} issues",
                bid.choices.len(),
                self.name,
                self.issues.len()
            )));
        }
        for (i, (&choice, issue)) in bid.choices.iter().zip(&self.issues).enumerate() {
            if choice >= issue.values.len() {
                return Err(Error::InvalidBid(format!(
                    "choice {} out of range for issue {} ({:?} has {} values)",
                    choice,
                    i,
                    issue.name,
                    issue.values.len()
                )));
            }
        }
        Ok(())
    }

    /// Uniformly random bid.
    pub fn random_bid(&self, rng: &mut rng::Rng) -> Bid {
        Bid {
            choices: self.issues.iter().map(|issue| rng.gen_range(0..issue.values.len())).collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let domain: Domain = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        domain.validate().map_err(|e| Error::Parse {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        Ok(domain)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }
}

/// A point in the outcome space: one value index per issue.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bid {
    pub choices: Vec<usize>,
}

impl Bid {
    pub fn new(choices: Vec<usize>) -> Self {
        Bid { choices }
    }
}

impl fmt::Display for Bid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.choices.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

const WEIGHT_SUM_TOL: f64 = 1e-6;
const EVAL_PEAK_TOL: f64 = 1e-6;

/// Linear additive utility: weights per issue plus per-value evaluations.
///
/// Invariants enforced at construction: weights are positive and sum to one
/// (renormalized when the deviation is below 1e-6, rejected otherwise),
/// evaluations lie in \[0,1\], and each issue attains evaluation 1 for at
/// least one value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearAdditiveUtility {
    weights: Vec<f64>,
    evaluations: Vec<Vec<f64>>,
}

impl LinearAdditiveUtility {
    pub fn new(weights: Vec<f64>, evaluations: Vec<Vec<f64>>) -> Result<Self> {
        if weights.len() != evaluations.len() {
            return Err(Error::InvalidUtility(format!(
                "{} weights but {} evaluation rows",
                weights.len(),
                evaluations.len()
            )));
        }
        if weights.is_empty() {
            return Err(Error::InvalidUtility("empty utility model".into()));
        }
        let sum: f64 = weights.iter().sum();
        if !sum.is_finite() || (sum - 1.0).abs() >= WEIGHT_SUM_TOL {
            return Err(Error::InvalidUtility(format!(
                "weights sum to {sum}, expected 1 within {WEIGHT_SUM_TOL}"
            )));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / sum).collect();
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidUtility("all weights must be positive".into()));
        }
        let mut evaluations = evaluations;
        for (i, row) in evaluations.iter_mut().enumerate() {
            if row.is_empty() {
                return Err(Error::InvalidUtility(format!("issue {i} has no evaluations")));
            }
            if row.iter().any(|e| !e.is_finite() || *e < 0.0 || *e > 1.0 + EVAL_PEAK_TOL) {
                return Err(Error::InvalidUtility(format!(
                    "issue {i} has an evaluation outside [0,1]"
                )));
            }
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if (max - 1.0).abs() > EVAL_PEAK_TOL {
                return Err(Error::InvalidUtility(format!(
                    "issue {i} peaks at {max}, expected a value with evaluation 1"
                )));
            }
            // snap the peak to exactly 1
            row.iter_mut().for_each(|e| *e = (*e / max).clamp(0.0, 1.0));
        }
        Ok(LinearAdditiveUtility { weights, evaluations })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn evaluations(&self) -> &[Vec<f64>] {
        &self.evaluations
    }

    pub fn issue_count(&self) -> usize {
        self.weights.len()
    }

    /// U(ω) = Σ_i w_i · e_i(v_{c_i}); errors on a dimension mismatch.
    pub fn utility(&self, bid: &Bid) -> Result<f64> {
        if bid.choices.len() != self.weights.len() {
            return Err(Error::InvalidBid(format!(
                "bid has {} choices, utility model expects {}",
                bid.choices.len(),
                self.weights.len()
            )));
        }
        let mut total = 0.0;
        for ((&choice, &w), row) in bid.choices.iter().zip(&self.weights).zip(&self.evaluations) {
            let e = *row.get(choice).ok_or_else(|| {
                Error::InvalidBid(format!("choice {choice} out of range ({} values)", row.len()))
            })?;
            total += w * e;
        }
        Ok(total)
    }

    /// Issue index with the smallest weight, lowest index on ties.
    pub fn least_weighted_issue(&self) -> usize {
        let mut best = 0;
        for (i, &w) in self.weights.iter().enumerate() {
            if w < self.weights[best] {
                best = i;
            }
        }
        best
    }
}

/// Û(ω,t) = u · d^t. Errors unless t ∈ \[0,1\] and d ∈ (0,1].
pub fn discounted_utility(u_value: f64, t: f64, d: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange(format!("t = {t} outside [0,1]")));
    }
    if !(d > 0.0 && d <= 1.0) {
        return Err(Error::OutOfRange(format!("discount d = {d} outside (0,1]")));
    }
    Ok(u_value * d.powf(t))
}

/// Session parameters shared by both parties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    /// Deadline expressed in rounds; t = round / deadline_rounds.
    pub deadline_rounds: u32,
    /// u_res, what each side receives on failure.
    pub reservation: f64,
    /// d_D, the discount applied to agreed bids.
    pub discount: f64,
    /// d, the agent's internal temporal discount used in rewards.
    pub agent_discount: f64,
}

impl SessionConfig {
    pub fn new(deadline_rounds: u32, reservation: f64, discount: f64, agent_discount: f64) -> Result<Self> {
        let config = SessionConfig { deadline_rounds, reservation, discount, agent_discount };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.deadline_rounds == 0 {
            return Err(Error::Config("deadline_rounds must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.reservation) {
            return Err(Error::Config(format!(
                "reservation {} outside [0,1)",
                self.reservation
            )));
        }
        for (name, d) in [("discount", self.discount), ("agent_discount", self.agent_discount)] {
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::Config(format!("{name} {d} outside (0,1]")));
            }
        }
        Ok(())
    }

    /// Normalized time of a 1-based round.
    pub fn time_of_round(&self, round: u32) -> f64 {
        (round as f64 / self.deadline_rounds as f64).min(1.0)
    }
}

impl Default for SessionConfig {
    fn default() -> Self {
        // 2000-round deadline keeps per-turn metaheuristic budgets practical.
        SessionConfig { deadline_rounds: 2000, reservation: 0.1, discount: 1.0, agent_discount: 0.95 }
    }
}

/// The ordered bid sample B_⪯ expressing user preference uncertainty:
/// bids ascending by the hidden true utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialPreferenceProfile {
    /// Ascending preference order (worst first).
    pub bids: Vec<Bid>,
    /// |B| / |Ω| this profile was sampled at.
    pub source_fraction: f64,
}

impl PartialPreferenceProfile {
    pub fn len(&self) -> usize {
        self.bids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bids.is_empty()
    }
}

/// Samples ⌈fraction·|Ω|⌉ distinct bids and orders them ascending by
/// `u_true`, ties broken by lexicographic bid order. Deterministic per seed.
pub fn sample_partial_profile(
    u_true: &LinearAdditiveUtility,
    domain: &Domain,
    fraction: f64,
    seed: u64,
) -> Result<PartialPreferenceProfile> {
    let count = domain.outcome_count();
    // guard against 0.05*420 = 21.000000000000004 ceiling up to 22
    let target = ((fraction * count as f64) - 1e-9).ceil() as u64;
    if target < 2 {
        return Err(Error::Config(format!(
            "fraction {fraction} of {count} outcomes yields {target} bids; need at least 2"
        )));
    }
    if target > count {
        return Err(Error::Config(format!(
            "fraction {fraction} asks for {target} bids but |Ω| = {count}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let mut chosen: BTreeSet<u64> = BTreeSet::new();
    while (chosen.len() as u64) < target {
        chosen.insert(rng.gen_range(0..count));
    }
    let mut scored: Vec<(f64, Bid)> = chosen
        .into_iter()
        .map(|idx| {
            let bid = domain.bid_at(idx);
            let u = u_true.utility(&bid).expect("enumerated bid is valid");
            (u, bid)
        })
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite utility").then_with(|| a.1.cmp(&b.1)));
    Ok(PartialPreferenceProfile {
        bids: scored.into_iter().map(|(_, bid)| bid).collect(),
        source_fraction: fraction,
    })
}

/// On-disk profile: a true utility model with its session constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityProfile {
    pub domain: String,
    pub utility: LinearAdditiveUtility,
    pub reservation: f64,
    pub discount: f64,
}

impl UtilityProfile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let profile: UtilityProfile = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        // round-trip through the validating constructor
        let utility = LinearAdditiveUtility::new(
            profile.utility.weights.clone(),
            profile.utility.evaluations.clone(),
        )
        .map_err(|e| Error::Parse {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        Ok(UtilityProfile { utility, ..profile })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }
}

/// On-disk partial profile: `{"bids": [[idx,...], ...]}` ascending.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct PartialProfileFile {
    bids: Vec<Vec<usize>>,
}

pub fn load_partial_profile(path: impl AsRef<Path>, domain: &Domain) -> Result<PartialPreferenceProfile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: PartialProfileFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    let bids: Vec<Bid> = file.bids.into_iter().map(Bid::new).collect();
    let mut seen = BTreeSet::new();
    for bid in &bids {
        domain.check_bid(bid).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        if !seen.insert(bid.clone()) {
            return Err(Error::Parse {
                path: path.display().to_string(),
                detail: format!("duplicate bid {bid}"),
            });
        }
    }
    let count = domain.outcome_count();
    Ok(PartialPreferenceProfile {
        source_fraction: bids.len() as f64 / count as f64,
        bids,
    })
}

pub fn save_partial_profile(profile: &PartialPreferenceProfile, path: impl AsRef<Path>) -> Result<()> {
    let file = PartialProfileFile {
        bids: profile.bids.iter().map(|b| b.choices.clone()).collect(),
    };
    write_json(path.as_ref(), &file)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{toy_domain, uniformish_utility};

    #[test]
    fn utility_single_issue() {
        let u = LinearAdditiveUtility::new(vec![1.0], vec![vec![0.7, 1.0]]).unwrap();
        assert_eq!(u.utility(&Bid::new(vec![0])).unwrap(), 0.7);
    }

    #[test]
    fn utility_symmetric_two_issue() {
        let u = LinearAdditiveUtility::new(vec![0.5, 0.5], vec![vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert_eq!(u.utility(&Bid::new(vec![0, 0])).unwrap(), 0.5);
    }

    #[test]
    fn utility_three_issue_hand_case() {
        let u = LinearAdditiveUtility::new(
            vec![0.2, 0.3, 0.5],
            vec![vec![1.0, 0.2], vec![0.5, 1.0], vec![0.4, 1.0]],
        )
        .unwrap();
        let got = u.utility(&Bid::new(vec![0, 0, 0])).unwrap();
        assert!((got - 0.55).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn utility_rejects_dimension_mismatch() {
        let u = LinearAdditiveUtility::new(vec![1.0], vec![vec![1.0]]).unwrap();
        assert!(matches!(u.utility(&Bid::new(vec![0, 1])), Err(Error::InvalidBid(_))));
    }

    #[test]
    fn weights_renormalized_when_close() {
        let u = LinearAdditiveUtility::new(vec![0.5 + 4e-7, 0.5], vec![vec![1.0], vec![1.0]]).unwrap();
        let sum: f64 = u.weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn weights_rejected_when_far() {
        let err = LinearAdditiveUtility::new(vec![0.6, 0.5], vec![vec![1.0], vec![1.0]]);
        assert!(err.is_err());
    }

    #[test]
    fn issue_must_peak_at_one() {
        let err = LinearAdditiveUtility::new(vec![1.0], vec![vec![0.5, 0.9]]);
        assert!(err.is_err());
    }

    #[test]
    fn discounting() {
        assert_eq!(discounted_utility(0.8, 0.0, 0.5).unwrap(), 0.8);
        assert_eq!(discounted_utility(0.8, 1.0, 1.0).unwrap(), 0.8);
        assert_eq!(discounted_utility(0.8, 1.0, 0.5).unwrap(), 0.4);
        assert!(discounted_utility(0.8, 1.5, 0.5).is_err());
        assert!(discounted_utility(0.8, 0.5, 0.0).is_err());
    }

    #[test]
    fn enumerate_is_lexicographic_and_complete() {
        let d = toy_domain(&[2, 3]);
        let bids: Vec<Bid> = d.enumerate().collect();
        assert_eq!(bids.len(), 6);
        let mut sorted = bids.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted, bids, "lexicographic and duplicate-free");
        assert_eq!(bids[0], Bid::new(vec![0, 0]));
        assert_eq!(bids[5], Bid::new(vec![1, 2]));
    }

    #[test]
    fn enumerate_singleton() {
        let d = toy_domain(&[1]);
        assert_eq!(d.enumerate().count(), 1);
    }

    #[test]
    fn flight_sized_domain_has_48_outcomes() {
        let d = toy_domain(&[4, 4, 3]);
        assert_eq!(d.outcome_count(), 48);
        assert_eq!(d.enumerate().count(), 48);
    }

    #[test]
    fn index_roundtrip() {
        let d = toy_domain(&[3, 2, 4]);
        for (i, bid) in d.enumerate().enumerate() {
            assert_eq!(d.index_of(&bid).unwrap(), i as u64);
            assert_eq!(d.bid_at(i as u64), bid);
        }
    }

    #[test]
    fn duplicate_issue_name_rejected() {
        let issues = vec![
            Issue { name: "a".into(), values: vec!["x".into()] },
            Issue { name: "a".into(), values: vec!["y".into()] },
        ];
        assert!(Domain::new("bad", issues).is_err());
    }

    #[test]
    fn partial_profile_sizes_match_ceiling_rule() {
        let airport = toy_domain(&[5, 7, 12]); // |Ω| = 420
        let u = uniformish_utility(&airport, 1);
        let p = sample_partial_profile(&u, &airport, 0.05, 9).unwrap();
        assert_eq!(p.len(), 21);

        let flight = toy_domain(&[4, 4, 3]); // |Ω| = 48
        let u = uniformish_utility(&flight, 2);
        let p = sample_partial_profile(&u, &flight, 0.10, 9).unwrap();
        assert_eq!(p.len(), 5);
    }

    #[test]
    fn partial_profile_is_deterministic_and_sorted() {
        let d = toy_domain(&[3, 3, 3]);
        let u = uniformish_utility(&d, 3);
        let a = sample_partial_profile(&u, &d, 0.3, 77).unwrap();
        let b = sample_partial_profile(&u, &d, 0.3, 77).unwrap();
        assert_eq!(a, b);
        for pair in a.bids.windows(2) {
            let (ua, ub) = (u.utility(&pair[0]).unwrap(), u.utility(&pair[1]).unwrap());
            assert!(ua < ub || (ua == ub && pair[0] < pair[1]));
        }
    }

    #[test]
    fn partial_profile_rejects_tiny_fraction() {
        let d = toy_domain(&[2]);
        let u = LinearAdditiveUtility::new(vec![1.0], vec![vec![0.2, 1.0]]).unwrap();
        assert!(sample_partial_profile(&u, &d, 0.1, 0).is_err());
    }

    #[test]
    fn domain_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("domain.json");
        let d = toy_domain(&[2, 3, 2, 4, 2, 3, 2, 2]);
        d.save(&path).unwrap();
        assert_eq!(Domain::load(&path).unwrap(), d);
    }

    #[test]
    fn domain_file_duplicate_issue_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("domain.json");
        std::fs::write(
            &path,
            r#"{"name":"bad","issues":[{"name":"a","values":["x"]},{"name":"a","values":["y"]}]}"#,
        )
        .unwrap();
        assert!(matches!(Domain::load(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn minimal_domain_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.json");
        std::fs::write(&path, r#"{"name":"one","issues":[{"name":"i","values":["v"]}]}"#).unwrap();
        let d = Domain::load(&path).unwrap();
        assert_eq!(d.issue_count(), 1);
    }

    #[test]
    fn partial_profile_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("partial.json");
        let d = toy_domain(&[3, 3]);
        let u = uniformish_utility(&d, 4);
        let p = sample_partial_profile(&u, &d, 0.5, 5).unwrap();
        save_partial_profile(&p, &path).unwrap();
        let loaded = load_partial_profile(&path, &d).unwrap();
        assert_eq!(loaded.bids, p.bids);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_model() -> impl Strategy<Value = (Domain, LinearAdditiveUtility, u64)> {
            (proptest::collection::vec(1usize..5, 1..4), 0u64..1000).prop_map(|(counts, seed)| {
                let d = toy_domain(&counts);
                let u = uniformish_utility(&d, seed);
                (d, u, seed)
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn utility_stays_in_unit_interval((d, u, _) in arb_model()) {
                for bid in d.enumerate() {
                    let v = u.utility(&bid).unwrap();
                    prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
                }
            }

            #[test]
            fn enumeration_count_is_product((d, _, _) in arb_model()) {
                prop_assert_eq!(d.enumerate().count() as u64, d.outcome_count());
            }

            #[test]
            fn discount_never_increases(u in 0.0f64..1.0, t in 0.0f64..=1.0, d in 0.01f64..=1.0) {
                let v = discounted_utility(u, t, d).unwrap();
                prop_assert!(v <= u + 1e-15);
                if t == 0.0 || d == 1.0 {
                    prop_assert!((v - u).abs() < 1e-12);
                }
            }

            #[test]
            fn utility_monotone_in_evaluations((d, u, seed) in arb_model()) {
                // bump one evaluation slot upward; utility of bids choosing it must not fall
                let mut rng = rng::seeded(seed ^ 0xabcd);
                let issue = rng.gen_range(0..d.issue_count());
                let value = rng.gen_range(0..d.issues[issue].values.len());
                let mut evals = u.evaluations().to_vec();
                let bumped = (evals[issue][value] + 0.3).min(1.0);
                evals[issue][value] = bumped;
                let max = evals[issue].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                evals[issue].iter_mut().for_each(|e| *e /= max);
                let u2 = LinearAdditiveUtility::new(u.weights().to_vec(), evals).unwrap();
                for bid in d.enumerate().filter(|b| b.choices[issue] == value) {
                    // renormalization can only scale the whole issue down uniformly,
                    // so the bumped slot still cannot lose utility
                    prop_assert!(u2.utility(&bid).unwrap() + 1e-12 >= u.utility(&bid).unwrap());
                }
            }
        }
    }
}
