//! Criterion benches for the data-parallel hot paths. Run with the default
//! features for the rayon build and with `--no-default-features` for the
//! sequential fallback; both produce identical results, so the numbers
//! compare directly:
//!
//! ```sh
//! cargo bench -p bargain
//! cargo bench -p bargain --no-default-features
//! ```

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use bargain::domain::{sample_partial_profile, Bid, SessionConfig};
use bargain::meta::firefly::FaParams;
use bargain::meta::nsga2::Nsga2Params;
use bargain::pareto::{approximate_front, brute_force_front, ENUMERATION_CAP};
use bargain::tournament::{
    gen_domain, run_tournament, AgentConfig, DomainConfig, Opposition, TournamentConfig,
};
use bargain::user_model::estimate_user_model;

fn bench_brute_force_front(c: &mut Criterion) {
    let g = gen_domain(&[5, 5, 4, 4, 4], Opposition::Medium, 10).unwrap();
    c.bench_function("brute_force_front_1600", |b| {
        b.iter(|| {
            brute_force_front(
                |bid: &Bid| {
                    (g.utility_a.utility(bid).unwrap(), g.utility_b.utility(bid).unwrap())
                },
                black_box(&g.domain),
                ENUMERATION_CAP,
            )
            .unwrap()
        })
    });
}

fn bench_nsga2(c: &mut Criterion) {
    let g = gen_domain(&[5, 5, 4, 4, 4], Opposition::Medium, 11).unwrap();
    let params = Nsga2Params::offline(3);
    c.bench_function("nsga2_offline_1600", |b| {
        b.iter(|| {
            approximate_front(
                |bid: &Bid| {
                    (g.utility_a.utility(bid).unwrap(), g.utility_b.utility(bid).unwrap())
                },
                black_box(&g.domain),
                &params,
            )
            .unwrap()
        })
    });
}

fn bench_user_model_estimation(c: &mut Criterion) {
    let g = gen_domain(&[5, 7, 12], Opposition::Medium, 12).unwrap();
    let partial = sample_partial_profile(&g.utility_a, &g.domain, 0.10, 13).unwrap();
    let fa = FaParams { population: 20, generations: 50, ..Default::default() }.with_seed(14);
    c.bench_function("estimate_user_model_420", |b| {
        b.iter(|| estimate_user_model(black_box(&g.domain), &partial, &fa).unwrap())
    });
}

fn bench_tournament(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    let tournament = TournamentConfig {
        agents: vec![
            AgentConfig::Boulware { exponent: 0.2 },
            AgentConfig::Conceder { exponent: 2.0 },
            AgentConfig::Hardliner { threshold: 0.8 },
            AgentConfig::Random,
        ],
        domains: vec![DomainConfig::Synthetic {
            name: "bench".into(),
            issues: vec![4, 4, 3],
            opposition: Opposition::Medium,
            gen_seed: Some(15),
        }],
        profiles: vec![0.1],
        repeats: 4,
        session: SessionConfig::new(200, 0.1, 1.0, 0.95).unwrap(),
        seed: 16,
    }
    .resolve(dir.path())
    .unwrap();
    c.bench_function("tournament_48_sessions", |b| {
        b.iter(|| run_tournament(black_box(&tournament), None).unwrap())
    });
}

criterion_group!(
    benches,
    bench_brute_force_front,
    bench_nsga2,
    bench_user_model_estimation,
    bench_tournament
);
criterion_main!(benches);
