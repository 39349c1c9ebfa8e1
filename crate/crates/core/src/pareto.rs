//! Pareto reasoning over the two estimated utilities: dominance, exact
//! brute-force fronts, NSGA-II approximate fronts, inverted generational
//! distance, and TOPSIS-based bid selection at a given own/opponent weighting.

use serde::{Deserialize, Serialize};

use crate::domain::{Bid, Domain};
use crate::error::{Error, Result};
use crate::meta::nsga2::{nsga2, Nsga2Params};
use crate::meta::topsis::topsis;
use crate::par;

/// Default |Ω| ceiling for exact enumeration.
pub const ENUMERATION_CAP: u64 = 1 << 20;

/// Strict Pareto dominance: no worse in both coordinates, better in at
/// least one.
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 >= b.0 && a.1 >= b.1 && (a.0 > b.0 || a.1 > b.1)
}

/// One front member: a bid with its two estimated utilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontEntry {
    pub bid: Bid,
    pub own: f64,
    pub opponent: f64,
}

impl FrontEntry {
    pub fn objectives(&self) -> (f64, f64) {
        (self.own, self.opponent)
    }
}

/// An internally nondominated set of bids, sorted by own utility descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    entries: Vec<FrontEntry>,
}

impl ParetoFront {
    /// Validates pairwise nondominance.
    pub fn new(mut entries: Vec<FrontEntry>) -> Result<Self> {
        for (i, a) in entries.iter().enumerate() {
            for (j, b) in entries.iter().enumerate() {
                if i != j && dominates(a.objectives(), b.objectives()) {
                    return Err(Error::Config(format!(
                        "front entry {i} dominates entry {j}"
                    )));
                }
            }
        }
        sort_entries(&mut entries);
        Ok(ParetoFront { entries })
    }

    pub fn entries(&self) -> &[FrontEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn sort_entries(entries: &mut [FrontEntry]) {
    entries.sort_by(|a, b| {
        b.own
            .partial_cmp(&a.own)
            .expect("finite objectives")
            .then_with(|| b.opponent.partial_cmp(&a.opponent).expect("finite objectives"))
            .then_with(|| a.bid.cmp(&b.bid))
    });
}

/// Exact nondominated set over all of Ω via a sort-and-sweep. Errors when
/// |Ω| exceeds `cap`.
pub fn brute_force_front<F>(evaluate: F, domain: &Domain, cap: u64) -> Result<ParetoFront>
where
    F: Fn(&Bid) -> (f64, f64) + Sync + Send,
{
    let count = domain.outcome_count();
    if count > cap {
        return Err(Error::Budget { size: count, cap });
    }
    let mut scored: Vec<FrontEntry> = par::map_indices_fine(count as usize, |i| {
        let bid = domain.bid_at(i as u64);
        let (own, opponent) = evaluate(&bid);
        FrontEntry { bid, own, opponent }
    });
    sort_entries(&mut scored);

    let mut entries: Vec<FrontEntry> = Vec::new();
    let mut best_opp = f64::NEG_INFINITY;
    let mut i = 0;
    while i < scored.len() {
        let mut j = i;
        while j < scored.len() && scored[j].own == scored[i].own {
            j += 1;
        }
        // entries are sorted by opponent desc within the group
        let group_max = scored[i].opponent;
        if group_max > best_opp {
            entries.extend(
                scored[i..j].iter().take_while(|e| e.opponent == group_max).cloned(),
            );
            best_opp = group_max;
        }
        i = j;
    }
    Ok(ParetoFront { entries })
}

/// Near-Pareto front via NSGA-II under the per-call params.
pub fn approximate_front<F>(evaluate: F, domain: &Domain, params: &Nsga2Params) -> Result<ParetoFront>
where
    F: Fn(&Bid) -> (f64, f64) + Sync + Send,
{
    let set = nsga2(evaluate, domain, params)?;
    // nsga2 output is already internally nondominated
    let mut entries: Vec<FrontEntry> = set
        .into_iter()
        .map(|(bid, (own, opponent))| FrontEntry { bid, own, opponent })
        .collect();
    sort_entries(&mut entries);
    Ok(ParetoFront { entries })
}

/// Inverted generational distance: mean Euclidean distance from each truth
/// point to the nearest approximation point. Infinite when the
/// approximation is empty.
pub fn igd(approx: &ParetoFront, truth: &ParetoFront) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::Config("igd needs a nonempty reference front".into()));
    }
    if approx.is_empty() {
        return Ok(f64::INFINITY);
    }
    let total: f64 = truth
        .entries
        .iter()
        .map(|t| {
            approx
                .entries
                .iter()
                .map(|a| {
                    let du = a.own - t.own;
                    let dv = a.opponent - t.opponent;
                    (du * du + dv * dv).sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(total / truth.len() as f64)
}

/// Picks a bid from the front by TOPSIS with criteria weights
/// `(own_weight, 1 − own_weight)`; the weight is clamped into \[0,1\].
pub fn select_bid(front: &ParetoFront, own_weight: f64) -> Result<&Bid> {
    if front.is_empty() {
        return Err(Error::Config("cannot select from an empty front".into()));
    }
    let w = own_weight.clamp(0.0, 1.0);
    // duplicate objective pairs carry no extra information for TOPSIS
    let mut seen: Vec<(f64, f64)> = Vec::new();
    let mut kept: Vec<usize> = Vec::new();
    for (i, entry) in front.entries.iter().enumerate() {
        if !seen.contains(&entry.objectives()) {
            seen.push(entry.objectives());
            kept.push(i);
        }
    }
    let matrix: Vec<Vec<f64>> = kept
        .iter()
        .map(|&i| vec![front.entries[i].own, front.entries[i].opponent])
        .collect();
    let ranking = topsis(&matrix, &[w, 1.0 - w])?;
    Ok(&front.entries[kept[ranking.order[0]]].bid)
}
