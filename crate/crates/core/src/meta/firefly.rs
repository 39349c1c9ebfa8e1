//! Firefly Algorithm for maximizing a black-box objective over a box.
//!
//! Synchronous variant: every generation each firefly scans the previous
//! generation for brighter mates, generates one candidate move per mate
//! (attraction `beta0·exp(-gamma·r²)` plus a uniform jitter that decays over
//! generations) and keeps the best improving candidate. Fireflies therefore
//! never lose fitness, which makes the best-so-far monotone, and each
//! firefly's moves draw from its own seeded stream, so parallel and
//! sequential runs agree bit-for-bit.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaParams {
    pub population: usize,
    pub generations: usize,
    /// Maximum attractiveness β0.
    pub beta0: f64,
    /// Light absorption coefficient γ.
    pub gamma: f64,
    /// Randomization step as a fraction of each coordinate's range; decays
    /// linearly to a tenth of its initial value.
    pub alpha: f64,
    pub seed: u64,
}

impl Default for FaParams {
    fn default() -> Self {
        FaParams { population: 20, generations: 200, beta0: 1.0, gamma: 0.01, alpha: 0.2, seed: 0 }
    }
}

impl FaParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::Config("firefly population must be at least 2".into()));
        }
        if self.generations < 1 {
            return Err(Error::Config("firefly needs at least one generation".into()));
        }
        if self.beta0 <= 0.0 || self.gamma <= 0.0 || self.alpha <= 0.0 {
            return Err(Error::Config("beta0, gamma and alpha must be positive".into()));
        }
        Ok(())
    }
}

fn check_fitness(value: f64, point: &[f64]) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Optimizer(format!("objective returned {value} at {point:?}")))
    }
}

/// Maximizes `objective` over the box `bounds`. Returns the best point found
/// and its fitness; the fitness dominates every candidate ever evaluated.
pub fn firefly_optimize<F>(
    objective: F,
    dim: usize,
    bounds: &[(f64, f64)],
    params: &FaParams,
) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    firefly_optimize_with_inits(objective, dim, bounds, params, &[])
}

/// Like [`firefly_optimize`], but the first fireflies start from `inits`
/// (clamped into bounds) instead of random positions. Because fireflies only
/// ever improve, the result is guaranteed at least as fit as every seeded
/// point.
pub fn firefly_optimize_with_inits<F>(
    objective: F,
    dim: usize,
    bounds: &[(f64, f64)],
    params: &FaParams,
    inits: &[Vec<f64>],
) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    params.validate()?;
    if inits.len() > params.population {
        return Err(Error::Config(format!(
            "{} seed points exceed population {}",
            inits.len(),
            params.population
        )));
    }
    if inits.iter().any(|x| x.len() != dim) {
        return Err(Error::Config("seed point dimension mismatch".into()));
    }
    if dim == 0 || bounds.len() != dim {
        return Err(Error::Config(format!(
            "expected {dim} coordinate bounds, got {}",
            bounds.len()
        )));
    }
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        if lo >= hi || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!("bounds for coordinate {i} must satisfy lo < hi")));
        }
    }

    let pop = params.population;
    let init: Vec<Result<(Vec<f64>, f64)>> = par::map_indices(pop, |i| {
        let x: Vec<f64> = if let Some(seeded) = inits.get(i) {
            seeded
                .iter()
                .zip(bounds)
                .map(|(&v, &(lo, hi))| v.clamp(lo, hi))
                .collect()
        } else {
            let mut rng = rng::stream(params.seed, i as u64);
            bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect()
        };
        let f = check_fitness(objective(&x), &x)?;
        Ok((x, f))
    });
    let mut swarm: Vec<(Vec<f64>, f64)> = init.into_iter().collect::<Result<_>>()?;

    for gen in 0..params.generations {
        let decay = if params.generations > 1 {
            gen as f64 / (params.generations - 1) as f64
        } else {
            0.0
        };
        let alpha_t = params.alpha * (1.0 - 0.9 * decay);
        let prev = swarm;
        let moved: Vec<Result<(Vec<f64>, f64)>> = par::map_indices(pop, |i| {
            let mut rng = rng::stream(params.seed, ((gen + 1) * pop + i) as u64);
            let (mut best_x, mut best_f) = prev[i].clone();
            for j in 0..pop {
                if prev[j].1 <= prev[i].1 {
                    continue;
                }
                let r2: f64 = prev[i]
                    .0
                    .iter()
                    .zip(&prev[j].0)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let beta = params.beta0 * (-params.gamma * r2).exp();
                let candidate: Vec<f64> = bounds
                    .iter()
                    .zip(prev[i].0.iter().zip(&prev[j].0))
                    .map(|(&(lo, hi), (&a, &b))| {
                        let jitter =
                            alpha_t * (hi - lo) * (rng.gen::<f64>() - 0.5);
                        (a + beta * (b - a) + jitter).clamp(lo, hi)
                    })
                    .collect();
                let f = check_fitness(objective(&candidate), &candidate)?;
                if f > best_f {
                    best_x = candidate;
                    best_f = f;
                }
            }
            Ok((best_x, best_f))
        });
        swarm = moved.into_iter().collect::<Result<_>>()?;
    }

    Ok(swarm
        .into_iter()
        .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite fitness"))
        .expect("non-empty swarm"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_bounds(dim: usize) -> Vec<(f64, f64)> {
        vec![(-1.0, 1.0); dim]
    }

    #[test]
    fn converges_on_sphere() {
        let params = FaParams::default().with_seed(11);
        let (best, fit) =
            firefly_optimize(|x| -x.iter().map(|v| v * v).sum::<f64>(), 5, &unit_bounds(5), &params)
                .unwrap();
        for (i, v) in best.iter().enumerate() {
            assert!(v.abs() <= 1e-2, "coordinate {i} = {v} too far from 0 (fitness {fit})");
        }
    }

    #[test]
    fn converges_in_one_dimension() {
        let params = FaParams::default().with_seed(3);
        let (best, _) =
            firefly_optimize(|x| -(x[0] - 0.3) * (x[0] - 0.3), 1, &unit_bounds(1), &params)
                .unwrap();
        assert!((best[0] - 0.3).abs() <= 1e-2, "got {}", best[0]);
    }

    #[test]
    fn constant_objective_returns_in_bounds_point() {
        let params = FaParams { population: 5, generations: 3, ..FaParams::default() };
        let (best, fit) = firefly_optimize(|_| 2.5, 3, &unit_bounds(3), &params).unwrap();
        assert_eq!(fit, 2.5);
        assert!(best.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn non_finite_objective_is_reported() {
        let params = FaParams { population: 4, generations: 2, ..FaParams::default() };
        let err = firefly_optimize(|x| 1.0 / (x[0] - x[0]), 1, &unit_bounds(1), &params);
        assert!(matches!(err, Err(Error::Optimizer(_))));
    }

    #[test]
    fn deterministic_per_seed() {
        let params = FaParams { population: 8, generations: 20, ..FaParams::default() }.with_seed(5);
        let obj = |x: &[f64]| -(x[0].powi(2) + (x[1] - 0.5).powi(2));
        let a = firefly_optimize(obj, 2, &unit_bounds(2), &params).unwrap();
        let b = firefly_optimize(obj, 2, &unit_bounds(2), &params).unwrap();
        assert_eq!(a, b);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn stays_in_bounds_for_any_seed(
                dim in 1usize..5,
                seed in 0u64..500,
            ) {
                let params = FaParams { population: 6, generations: 6, ..FaParams::default() }
                    .with_seed(seed);
                let bounds: Vec<(f64, f64)> =
                    (0..dim).map(|i| (-(i as f64) - 1.0, i as f64 + 2.0)).collect();
                let (best, fit) = firefly_optimize(
                    |x| -x.iter().map(|v| v * v).sum::<f64>(),
                    dim,
                    &bounds,
                    &params,
                )
                .unwrap();
                prop_assert_eq!(best.len(), dim);
                prop_assert!(fit.is_finite());
                for (v, (lo, hi)) in best.iter().zip(&bounds) {
                    prop_assert!(lo <= v && v <= hi);
                }
            }
        }
    }

    #[test]
    fn returned_fitness_dominates_every_evaluation() {
        use std::sync::Mutex;
        let seen = Mutex::new(Vec::new());
        let obj = |x: &[f64]| {
            let f = -x.iter().map(|v| (v - 0.2).abs()).sum::<f64>();
            seen.lock().unwrap().push(f);
            f
        };
        let params = FaParams { population: 10, generations: 25, ..FaParams::default() }.with_seed(9);
        let (_, fit) = firefly_optimize(obj, 3, &unit_bounds(3), &params).unwrap();
        let max_seen = seen.lock().unwrap().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(fit, max_seen);
    }
}
