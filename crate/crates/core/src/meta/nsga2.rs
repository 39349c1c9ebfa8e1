//! NSGA-II over discrete bid encodings: fast non-dominated sorting, crowding
//! distance, binary tournament selection, uniform per-issue crossover and
//! per-issue reset mutation.

use std::cmp::Ordering;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::domain::{Bid, Domain};
use crate::error::{Error, Result};
use crate::par;
use crate::pareto::dominates;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nsga2Params {
    pub population: usize,
    pub generations: usize,
    /// Per-issue reset probability.
    pub mutation_rate: f64,
    pub seed: u64,
}

impl Nsga2Params {
    /// Per-turn budget: population 2% of |Ω| (floored at 4), 2 generations.
    pub fn per_turn(outcome_count: u64, seed: u64) -> Self {
        let population = ((outcome_count as f64 * 0.02).ceil() as usize).max(4);
        Nsga2Params { population, generations: 2, mutation_rate: 0.1, seed }
    }

    /// Wider offline budget: population 100, 25 generations.
    pub fn offline(seed: u64) -> Self {
        Nsga2Params { population: 100, generations: 25, mutation_rate: 0.1, seed }
    }

    fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::Config("nsga2 population must be at least 2".into()));
        }
        if self.generations < 1 {
            return Err(Error::Config("nsga2 needs at least one generation".into()));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::Config(format!(
                "mutation rate {} outside [0,1]",
                self.mutation_rate
            )));
        }
        Ok(())
    }
}

/// Splits points into Pareto fronts. Front 0 holds exactly the nondominated
/// points; every index lands in exactly one front.
pub fn fast_nondominated_sort(points: &[(f64, f64)]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    let mut fronts: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();

    for p in 0..n {
        for q in (p + 1)..n {
            if dominates(points[p], points[q]) {
                dominated_by[p].push(q);
                domination_count[q] += 1;
            } else if dominates(points[q], points[p]) {
                dominated_by[q].push(p);
                domination_count[p] += 1;
            }
        }
        if domination_count[p] == 0 {
            current.push(p);
        }
    }

    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominated_by[p] {
                domination_count[q] -= 1;
                if domination_count[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Crowding distance of each member of `front`, aligned with its order.
pub fn crowding_distance(points: &[(f64, f64)], front: &[usize]) -> Vec<f64> {
    let m = front.len();
    let mut distance = vec![0.0f64; m];
    if m <= 2 {
        return vec![f64::INFINITY; m];
    }
    for objective in 0..2 {
        let value = |idx: usize| {
            let p = points[front[idx]];
            if objective == 0 {
                p.0
            } else {
                p.1
            }
        };
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| {
            value(a).partial_cmp(&value(b)).unwrap_or(Ordering::Equal).then(a.cmp(&b))
        });
        let span = value(order[m - 1]) - value(order[0]);
        distance[order[0]] = f64::INFINITY;
        distance[order[m - 1]] = f64::INFINITY;
        if span <= 0.0 {
            continue;
        }
        for w in 1..m - 1 {
            let gap = value(order[w + 1]) - value(order[w - 1]);
            distance[order[w]] += gap / span;
        }
    }
    distance
}

struct Ranked {
    rank: Vec<usize>,
    crowding: Vec<f64>,
}

fn rank_population(objectives: &[(f64, f64)]) -> Ranked {
    let fronts = fast_nondominated_sort(objectives);
    let mut rank = vec![0usize; objectives.len()];
    let mut crowding = vec![0.0f64; objectives.len()];
    for (r, front) in fronts.iter().enumerate() {
        let dist = crowding_distance(objectives, front);
        for (&idx, &d) in front.iter().zip(&dist) {
            rank[idx] = r;
            crowding[idx] = d;
        }
    }
    Ranked { rank, crowding }
}

fn tournament_pick(ranked: &Ranked, rng: &mut rng::Rng, n: usize) -> usize {
    let a = rng.gen_range(0..n);
    let b = rng.gen_range(0..n);
    match ranked.rank[a]
        .cmp(&ranked.rank[b])
        .then_with(|| ranked.crowding[b].partial_cmp(&ranked.crowding[a]).unwrap_or(Ordering::Equal))
        .then_with(|| a.cmp(&b))
    {
        Ordering::Greater => b,
        _ => a,
    }
}

/// Moves `candidates` into the archive, keeping only nondominated entries
/// (deduplicated by bid).
fn archive_insert(archive: &mut Vec<(Bid, (f64, f64))>, candidates: &[(Bid, (f64, f64))]) {
    for (bid, objectives) in candidates {
        if archive.iter().any(|(b, o)| b == bid || dominates(*o, *objectives)) {
            continue;
        }
        archive.retain(|(_, o)| !dominates(*objectives, *o));
        archive.push((bid.clone(), *objectives));
    }
}

/// Approximates the Pareto set of `evaluate` over the domain's outcome
/// space. Alongside the usual population, an external archive keeps the
/// nondominated subset of every point evaluated, so nothing the search saw
/// is wasted. The returned set is internally nondominated, deduplicated by
/// bid and deterministic per seed.
pub fn nsga2<F>(evaluate: F, domain: &Domain, params: &Nsga2Params) -> Result<Vec<(Bid, (f64, f64))>>
where
    F: Fn(&Bid) -> (f64, f64) + Sync + Send,
{
    params.validate()?;
    let pop_size = params.population;
    let mut init_rng = rng::stream(params.seed, 0);
    let mut population: Vec<Bid> = (0..pop_size).map(|_| domain.random_bid(&mut init_rng)).collect();
    let mut objectives: Vec<(f64, f64)> = par::map_slice_fine(&population, &evaluate);
    let mut archive: Vec<(Bid, (f64, f64))> = Vec::new();
    archive_insert(
        &mut archive,
        &population.iter().cloned().zip(objectives.iter().copied()).collect::<Vec<_>>(),
    );

    // every evaluation should land on a fresh bid; tiny populations
    // otherwise burn most of their budget re-scoring duplicates
    let mut seen: std::collections::HashSet<Bid> = population.iter().cloned().collect();
    let domain_size = domain.outcome_count();

    for gen in 0..params.generations {
        let ranked = rank_population(&objectives);
        let mut rng = rng::stream(params.seed, 1 + gen as u64);
        let mut children: Vec<Bid> = Vec::with_capacity(pop_size);
        while children.len() < pop_size {
            let pa = tournament_pick(&ranked, &mut rng, pop_size);
            let pb = tournament_pick(&ranked, &mut rng, pop_size);
            let mut child: Vec<usize> = population[pa]
                .choices
                .iter()
                .zip(&population[pb].choices)
                .map(|(&x, &y)| if rng.gen_bool(0.5) { x } else { y })
                .collect();
            for (slot, issue) in child.iter_mut().zip(&domain.issues) {
                if rng.gen::<f64>() < params.mutation_rate {
                    *slot = rng.gen_range(0..issue.values.len());
                }
            }
            let mut bid = Bid::new(child);
            if (seen.len() as u64) < domain_size {
                let mut attempts = 0;
                while seen.contains(&bid) && attempts < 16 {
                    // nudge one issue; fall back to a fresh draw
                    if attempts < 8 {
                        let issue = rng.gen_range(0..domain.issues.len());
                        bid.choices[issue] = rng.gen_range(0..domain.issues[issue].values.len());
                    } else {
                        bid = domain.random_bid(&mut rng);
                    }
                    attempts += 1;
                }
            }
            seen.insert(bid.clone());
            children.push(bid);
        }
        let child_objectives: Vec<(f64, f64)> = par::map_slice_fine(&children, &evaluate);
        archive_insert(
            &mut archive,
            &children.iter().cloned().zip(child_objectives.iter().copied()).collect::<Vec<_>>(),
        );

        population.extend(children);
        objectives.extend(child_objectives);
        let fronts = fast_nondominated_sort(&objectives);
        let mut keep: Vec<usize> = Vec::with_capacity(pop_size);
        for front in fronts {
            if keep.len() + front.len() <= pop_size {
                keep.extend(front);
                if keep.len() == pop_size {
                    break;
                }
            } else {
                let dist = crowding_distance(&objectives, &front);
                let mut order: Vec<usize> = (0..front.len()).collect();
                order.sort_by(|&a, &b| {
                    dist[b]
                        .partial_cmp(&dist[a])
                        .unwrap_or(Ordering::Equal)
                        .then_with(|| front[a].cmp(&front[b]))
                });
                keep.extend(order.into_iter().take(pop_size - keep.len()).map(|w| front[w]));
                break;
            }
        }
        population = keep.iter().map(|&i| population[i].clone()).collect();
        objectives = keep.iter().map(|&i| objectives[i]).collect();
    }

    let mut result = archive;
    result.sort_by(|a, b| {
        b.1 .0
            .partial_cmp(&a.1 .0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| b.1 .1.partial_cmp(&a.1 .1).unwrap_or(Ordering::Equal))
            .then_with(|| a.0.cmp(&b.0))
    });
    result.dedup_by(|a, b| a.0 == b.0);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{toy_domain, uniformish_utility};

    #[test]
    fn sort_keeps_mutually_nondominated_points_together() {
        let fronts = fast_nondominated_sort(&[(1.0, 0.0), (0.0, 1.0), (0.5, 0.5)]);
        assert_eq!(fronts, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn sort_splits_strictly_dominated_point() {
        let fronts = fast_nondominated_sort(&[(1.0, 1.0), (0.5, 0.5)]);
        assert_eq!(fronts, vec![vec![0], vec![1]]);
    }

    fn brute_front(points: &[(f64, f64)]) -> Vec<usize> {
        (0..points.len())
            .filter(|&i| (0..points.len()).all(|j| !dominates(points[j], points[i])))
            .collect()
    }

    #[test]
    fn front_zero_matches_pairwise_filter() {
        let mut rng = rng::seeded(17);
        for _ in 0..50 {
            let points: Vec<(f64, f64)> =
                (0..20).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
            let fronts = fast_nondominated_sort(&points);
            assert_eq!(fronts[0], brute_front(&points));
            let total: usize = fronts.iter().map(Vec::len).sum();
            assert_eq!(total, points.len(), "every point in exactly one front");
        }
    }

    #[test]
    fn collapses_to_argmax_when_objectives_agree() {
        let domain = toy_domain(&[3, 2]);
        let u = uniformish_utility(&domain, 21);
        let eval = |bid: &Bid| {
            let v = u.utility(bid).unwrap();
            (v, v)
        };
        let params = Nsga2Params { population: 8, generations: 10, mutation_rate: 0.2, seed: 4 };
        let got = nsga2(eval, &domain, &params).unwrap();
        let best = domain
            .enumerate()
            .map(|b| u.utility(&b).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        for (_, (a, b)) in &got {
            assert_eq!(a, b);
            assert!((a - best).abs() < 1e-12, "kept non-argmax point {a} vs best {best}");
        }
    }

    #[test]
    fn tiny_domain_recovers_true_front() {
        let domain = toy_domain(&[3, 2]); // |Ω| = 6
        let ua = uniformish_utility(&domain, 31);
        let ub = uniformish_utility(&domain, 32);
        let eval = |bid: &Bid| (ua.utility(bid).unwrap(), ub.utility(bid).unwrap());
        let params = Nsga2Params { population: 8, generations: 12, mutation_rate: 0.2, seed: 5 };
        let got = nsga2(eval, &domain, &params).unwrap();

        let all: Vec<(Bid, (f64, f64))> = domain.enumerate().map(|b| {
            let o = eval(&b);
            (b, o)
        }).collect();
        let mut truth: Vec<(Bid, (f64, f64))> = all
            .iter()
            .filter(|(_, o)| all.iter().all(|(_, other)| !dominates(*other, *o)))
            .cloned()
            .collect();
        truth.sort_by(|a, b| {
            b.1 .0.partial_cmp(&a.1 .0).unwrap().then_with(|| a.0.cmp(&b.0))
        });
        let got_bids: Vec<&Bid> = got.iter().map(|(b, _)| b).collect();
        let truth_bids: Vec<&Bid> = truth.iter().map(|(b, _)| b).collect();
        assert_eq!(got_bids, truth_bids);
    }

    #[test]
    fn output_is_internally_nondominated_and_deterministic() {
        let domain = toy_domain(&[4, 4, 3]);
        let ua = uniformish_utility(&domain, 41);
        let ub = uniformish_utility(&domain, 42);
        let eval = |bid: &Bid| (ua.utility(bid).unwrap(), ub.utility(bid).unwrap());
        let params = Nsga2Params::per_turn(domain.outcome_count(), 6);
        assert_eq!(params.population, 4);
        let a = nsga2(eval, &domain, &params).unwrap();
        let b = nsga2(eval, &domain, &params).unwrap();
        assert_eq!(a.len(), b.len());
        assert!(a.iter().zip(&b).all(|(x, y)| x.0 == y.0 && x.1 == y.1));
        for (i, (_, oi)) in a.iter().enumerate() {
            for (j, (_, oj)) in a.iter().enumerate() {
                if i != j {
                    assert!(!dominates(*oi, *oj), "returned point {i} dominates {j}");
                }
            }
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn returned_set_is_always_nondominated(
                counts in proptest::collection::vec(2usize..5, 1..4),
                seed in 0u64..500,
            ) {
                let domain = toy_domain(&counts);
                let ua = uniformish_utility(&domain, seed);
                let ub = uniformish_utility(&domain, seed ^ 0x5ca1ab1e);
                let params = Nsga2Params::per_turn(domain.outcome_count(), seed);
                let got = nsga2(
                    |b: &Bid| (ua.utility(b).unwrap(), ub.utility(b).unwrap()),
                    &domain,
                    &params,
                )
                .unwrap();
                prop_assert!(!got.is_empty());
                for (i, (_, oi)) in got.iter().enumerate() {
                    for (j, (_, oj)) in got.iter().enumerate() {
                        if i != j {
                            prop_assert!(!dominates(*oi, *oj));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn per_turn_preset_floors_population() {
        assert_eq!(Nsga2Params::per_turn(48, 0).population, 4);
        assert_eq!(Nsga2Params::per_turn(1600, 0).population, 32);
        assert_eq!(Nsga2Params::offline(0).population, 100);
    }
}
