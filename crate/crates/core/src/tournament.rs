//! Configuration-driven round-robin tournaments and the synthetic domain
//! generator, plus helpers that stitch the pipeline together: collecting
//! teacher traces for supervised pretraining and running online RL
//! episodes.
//!
//! Every session owns a seed derived from the master seed and its position
//! in the fixed enumeration (pairs → domains → uncertainty profiles →
//! repeats → role swap), so runs are reproducible byte for byte and safe to
//! fan out across threads.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::agents::{BaselineAgent, BaselineKind, StrategyAgent};
use crate::domain::{
    sample_partial_profile, write_json, Domain, Issue, LinearAdditiveUtility, SessionConfig,
    UtilityProfile,
};
use crate::drl::DdpgModel;
use crate::error::{Error, Result};
use crate::meta::firefly::FaParams;
use crate::metrics::{compute_metrics, write_metrics_csv, MetricsRow};
use crate::par;
use crate::protocol::{run_session, Negotiator, SessionLog, SessionSetup};
use crate::rng;
use crate::strategy::ConcreteStrategy;
use crate::user_model::estimate_user_model;

/// Competitiveness bands: the minimum distance from any outcome's joint
/// true utility to the ideal point (1,1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Opposition {
    /// min distance < 0.2
    Low,
    /// min distance in [0.2, 0.4]
    Medium,
    /// min distance > 0.4
    High,
}

impl Opposition {
    pub fn contains(&self, distance: f64) -> bool {
        match self {
            Opposition::Low => distance < 0.2,
            Opposition::Medium => (0.2..=0.4).contains(&distance),
            Opposition::High => distance > 0.4,
        }
    }
}

/// A synthesized domain with two true utility profiles in a declared
/// opposition band.
#[derive(Debug, Clone)]
pub struct GeneratedDomain {
    pub domain: Domain,
    pub utility_a: LinearAdditiveUtility,
    pub utility_b: LinearAdditiveUtility,
    /// Measured min distance of outcomes from (1,1).
    pub opposition: f64,
}

/// Issue shapes whose outcome counts mirror the usual benchmark sizes.
pub fn preset_shape(outcome_count: u64) -> Option<&'static [usize]> {
    match outcome_count {
        48 => Some(&[4, 4, 3]),
        128 => Some(&[4, 4, 4, 2]),
        180 => Some(&[5, 6, 3, 2]),
        420 => Some(&[5, 7, 12]),
        1600 => Some(&[5, 5, 4, 4, 4]),
        3520 => Some(&[5, 4, 4, 11, 4]),
        3600 => Some(&[5, 5, 4, 4, 3, 3]),
        15625 => Some(&[5, 5, 5, 5, 5, 5]),
        _ => None,
    }
}

fn random_simplex(n: usize, rng: &mut rng::Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

fn random_evaluations(domain: &Domain, rng: &mut rng::Rng) -> Vec<Vec<f64>> {
    domain
        .issues
        .iter()
        .map(|issue| {
            let mut row: Vec<f64> =
                (0..issue.values.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.iter_mut().for_each(|e| *e /= max);
            row
        })
        .collect()
}

fn measured_opposition(
    domain: &Domain,
    ua: &LinearAdditiveUtility,
    ub: &LinearAdditiveUtility,
) -> f64 {
    domain
        .enumerate()
        .map(|bid| {
            let (u, v) = (ua.utility(&bid).unwrap_or(0.0), ub.utility(&bid).unwrap_or(0.0));
            ((1.0 - u) * (1.0 - u) + (1.0 - v) * (1.0 - v)).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

const GENERATION_ATTEMPTS: u64 = 400;

/// Synthesizes a domain with the requested per-issue value counts and two
/// utility profiles whose measured opposition falls in the requested band,
/// retrying with fresh draws until it does.
pub fn gen_domain(
    issue_counts: &[usize],
    opposition: Opposition,
    seed: u64,
) -> Result<GeneratedDomain> {
    if issue_counts.is_empty() || issue_counts.contains(&0) {
        return Err(Error::Config("issue counts must be positive".into()));
    }
    let issues: Vec<Issue> = issue_counts
        .iter()
        .enumerate()
        .map(|(i, &k)| Issue {
            name: format!("issue{}", i + 1),
            values: (0..k).map(|v| format!("v{}", v + 1)).collect(),
        })
        .collect();
    let domain = Domain::new(format!("synth-{}", issue_counts.iter().map(|k| k.to_string()).collect::<Vec<_>>().join("x")), issues)?;

    for attempt in 0..GENERATION_ATTEMPTS {
        let mut rng = rng::stream(seed, attempt);
        let weights_a = random_simplex(domain.issue_count(), &mut rng);
        let weights_b = random_simplex(domain.issue_count(), &mut rng);
        let evals_a = random_evaluations(&domain, &mut rng);
        let mix = match opposition {
            Opposition::Low => rng.gen_range(0.0..0.2),
            Opposition::Medium => rng.gen_range(0.25..0.75),
            Opposition::High => rng.gen_range(0.85..1.0),
        };
        let evals_b: Vec<Vec<f64>> = evals_a
            .iter()
            .map(|row| {
                let mut flipped: Vec<f64> = row
                    .iter()
                    .map(|e| {
                        let blended = (1.0 - mix) * e + mix * (1.0 - e);
                        (blended + rng.gen_range(-0.1..0.1)).clamp(0.0, 1.0)
                    })
                    .collect();
                let max = flipped.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if max < 1e-9 {
                    flipped = vec![1.0; row.len()];
                } else {
                    flipped.iter_mut().for_each(|e| *e /= max);
                }
                flipped
            })
            .collect();
        let ua = LinearAdditiveUtility::new(weights_a, evals_a)?;
        let ub = LinearAdditiveUtility::new(weights_b, evals_b)?;
        let measured = measured_opposition(&domain, &ua, &ub);
        if opposition.contains(measured) {
            return Ok(GeneratedDomain { domain, utility_a: ua, utility_b: ub, opposition: measured });
        }
    }
    Err(Error::Generation(format!(
        "no profile pair hit the {opposition:?} band for shape {issue_counts:?} after {GENERATION_ATTEMPTS} attempts"
    )))
}

/// On-disk tournament configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TournamentConfig {
    pub agents: Vec<AgentConfig>,
    pub domains: Vec<DomainConfig>,
    /// Uncertainty profiles: |B| as a fraction of |Ω|.
    pub profiles: Vec<f64>,
    /// Tournament repetitions per cell.
    pub repeats: u32,
    #[serde(default)]
    pub session: SessionConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AgentConfig {
    Boulware { exponent: f64 },
    Conceder { exponent: f64 },
    Hardliner { threshold: f64 },
    Random,
    FrequencyTeacher { window: usize },
    Adaptive {
        #[serde(default)]
        name: Option<String>,
        /// Strategy JSON; the worked-example strategy when absent.
        #[serde(default)]
        strategy: Option<PathBuf>,
        /// DDPG checkpoint; a fresh seeded model when absent.
        #[serde(default)]
        model: Option<PathBuf>,
        #[serde(default)]
        online: bool,
        /// Estimate the user model from a sampled partial profile instead
        /// of reading the true utility.
        #[serde(default)]
        estimate: bool,
        #[serde(default)]
        fa: Option<FaParams>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DomainConfig {
    Synthetic {
        name: String,
        issues: Vec<usize>,
        opposition: Opposition,
        #[serde(default)]
        gen_seed: Option<u64>,
    },
    Files {
        name: String,
        domain: PathBuf,
        profile_a: PathBuf,
        profile_b: PathBuf,
    },
}

/// A runnable agent description with all files resolved.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum AgentBlueprint {
    Baseline(BaselineKind),
    Adaptive {
        strategy: ConcreteStrategy,
        model: Option<DdpgModel>,
        online: bool,
        estimate: Option<FaParams>,
    },
}

#[derive(Debug, Clone)]
pub struct RosterEntry {
    pub name: String,
    pub blueprint: AgentBlueprint,
}

/// One negotiation arena: a domain plus both sides' true utilities.
#[derive(Debug, Clone)]
pub struct Arena {
    pub name: String,
    pub domain: Domain,
    pub utility_a: LinearAdditiveUtility,
    pub utility_b: LinearAdditiveUtility,
}

/// A fully resolved tournament.
#[derive(Debug, Clone)]
pub struct Tournament {
    pub roster: Vec<RosterEntry>,
    pub arenas: Vec<Arena>,
    pub profiles: Vec<f64>,
    pub repeats: u32,
    pub session: SessionConfig,
    pub seed: u64,
}

impl TournamentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            detail: e.to_string(),
        })
    }

    /// Loads referenced files (relative to `base_dir`), generates synthetic
    /// arenas and validates the roster.
    pub fn resolve(&self, base_dir: &Path) -> Result<Tournament> {
        self.session.validate()?;
        if self.agents.len() < 2 {
            return Err(Error::Config("a tournament needs at least two agents".into()));
        }
        if self.profiles.is_empty() || self.repeats == 0 || self.domains.is_empty() {
            return Err(Error::Config("domains, profiles and repeats must be nonempty".into()));
        }
        let mut roster = Vec::with_capacity(self.agents.len());
        for agent in &self.agents {
            roster.push(resolve_agent(agent, base_dir, self.seed)?);
        }
        let mut names: Vec<&str> = roster.iter().map(|r| r.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != roster.len() {
            return Err(Error::Config("agent names must be unique".into()));
        }

        let mut arenas = Vec::with_capacity(self.domains.len());
        for (idx, entry) in self.domains.iter().enumerate() {
            arenas.push(match entry {
                DomainConfig::Synthetic { name, issues, opposition, gen_seed } => {
                    let seed = gen_seed.unwrap_or_else(|| rng::derive(self.seed, 0xD0_000 + idx as u64));
                    let generated = gen_domain(issues, *opposition, seed)?;
                    Arena {
                        name: name.clone(),
                        domain: generated.domain,
                        utility_a: generated.utility_a,
                        utility_b: generated.utility_b,
                    }
                }
                DomainConfig::Files { name, domain, profile_a, profile_b } => {
                    let domain = Domain::load(base_dir.join(domain))?;
                    let pa = UtilityProfile::load(base_dir.join(profile_a))?;
                    let pb = UtilityProfile::load(base_dir.join(profile_b))?;
                    Arena {
                        name: name.clone(),
                        domain,
                        utility_a: pa.utility,
                        utility_b: pb.utility,
                    }
                }
            });
        }
        Ok(Tournament {
            roster,
            arenas,
            profiles: self.profiles.clone(),
            repeats: self.repeats,
            session: self.session,
            seed: self.seed,
        })
    }
}

fn resolve_agent(config: &AgentConfig, base_dir: &Path, seed: u64) -> Result<RosterEntry> {
    Ok(match config {
        AgentConfig::Boulware { exponent } => {
            let kind = BaselineKind::Boulware { exponent: *exponent };
            RosterEntry { name: kind.label(), blueprint: AgentBlueprint::Baseline(kind) }
        }
        AgentConfig::Conceder { exponent } => {
            let kind = BaselineKind::Conceder { exponent: *exponent };
            RosterEntry { name: kind.label(), blueprint: AgentBlueprint::Baseline(kind) }
        }
        AgentConfig::Hardliner { threshold } => {
            let kind = BaselineKind::Hardliner { threshold: *threshold };
            RosterEntry { name: kind.label(), blueprint: AgentBlueprint::Baseline(kind) }
        }
        AgentConfig::Random => RosterEntry {
            name: "random".into(),
            blueprint: AgentBlueprint::Baseline(BaselineKind::Random),
        },
        AgentConfig::FrequencyTeacher { window } => {
            let kind = BaselineKind::FrequencyTeacher { window: *window };
            RosterEntry { name: kind.label(), blueprint: AgentBlueprint::Baseline(kind) }
        }
        AgentConfig::Adaptive { name, strategy, model, online, estimate, fa } => {
            let strategy = match strategy {
                Some(path) => ConcreteStrategy::load(base_dir.join(path))?,
                None => ConcreteStrategy::example(),
            };
            let model = match model {
                Some(path) => Some(DdpgModel::load(base_dir.join(path))?),
                None if strategy.needs_drl() => {
                    Some(DdpgModel::new(Default::default(), rng::derive(seed, 0xAD_A97))?)
                }
                None => None,
            };
            RosterEntry {
                name: name.clone().unwrap_or_else(|| "adaptive".into()),
                blueprint: AgentBlueprint::Adaptive {
                    strategy,
                    model,
                    online: *online,
                    estimate: estimate.then(|| fa.unwrap_or_default()),
                },
            }
        }
    })
}

/// n(n−1)/2 · 2 · y · z · w.
pub fn expected_session_count(agents: usize, domains: usize, repeats: u32, profiles: usize) -> u64 {
    (agents as u64 * (agents as u64 - 1) / 2)
        * 2
        * domains as u64
        * repeats as u64
        * profiles as u64
}

#[derive(Debug, Clone, Copy)]
struct SessionPlan {
    agent_x: usize,
    agent_y: usize,
    arena: usize,
    profile: usize,
    /// When set, agent_y opens the session and plays side A.
    swapped: bool,
    index: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairReport {
    pub agents: [String; 2],
    pub rows: Vec<MetricsRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TournamentReport {
    pub session_count: u64,
    pub expected_count: u64,
    pub rows: Vec<MetricsRow>,
    pub pairs: Vec<PairReport>,
}

/// Cache key: estimated user models are shared by arena, side and
/// uncertainty fraction — the estimation procedure is the same regardless
/// of which adaptive entry asks.
type EstimateKey = (usize, usize, usize);

struct EstimateCache {
    models: BTreeMap<EstimateKey, (LinearAdditiveUtility, u32)>,
}

impl EstimateCache {
    fn build(t: &Tournament) -> Result<Self> {
        let fa_by_need: Vec<FaParams> = t
            .roster
            .iter()
            .filter_map(|r| match &r.blueprint {
                AgentBlueprint::Adaptive { estimate: Some(fa), .. } => Some(*fa),
                _ => None,
            })
            .collect();
        let mut models = BTreeMap::new();
        if fa_by_need.is_empty() {
            return Ok(EstimateCache { models });
        }
        // estimates are shared across entries, so the search settings must
        // agree
        let fa = fa_by_need[0];
        if fa_by_need.iter().any(|other| other != &fa) {
            return Err(Error::Config(
                "estimating agents must share one set of search parameters".into(),
            ));
        }
        let mut keys: Vec<EstimateKey> = Vec::new();
        for arena in 0..t.arenas.len() {
            for side in 0..2 {
                for profile in 0..t.profiles.len() {
                    keys.push((arena, side, profile));
                }
            }
        }
        let estimates: Vec<Result<(EstimateKey, (LinearAdditiveUtility, u32))>> =
            par::map_slice(&keys, |&(arena, side, profile)| {
                let a = &t.arenas[arena];
                let truth = if side == 0 { &a.utility_a } else { &a.utility_b };
                let fraction = t.profiles[profile];
                let stream = 0xE5_0000 + ((arena * 2 + side) * t.profiles.len() + profile) as u64;
                let sample_seed = rng::derive(t.seed, stream);
                let partial = sample_partial_profile(truth, &a.domain, fraction, sample_seed)?;
                let b_count = partial.len() as u32;
                let fa = FaParams { seed: rng::derive(t.seed, stream + 1_000_000), ..fa };
                let report = estimate_user_model(&a.domain, &partial, &fa)?;
                Ok(((arena, side, profile), (report.estimated, b_count)))
            });
        for entry in estimates {
            let (key, value) = entry?;
            models.insert(key, value);
        }
        Ok(EstimateCache { models })
    }

    fn get(&self, key: EstimateKey) -> Option<&(LinearAdditiveUtility, u32)> {
        self.models.get(&key)
    }
}

#[allow(clippy::too_many_arguments)]
fn build_agent(
    entry: &RosterEntry,
    arena: &Arena,
    side: usize,
    profile_idx: usize,
    estimates: &EstimateCache,
    config: &SessionConfig,
    agent_seed: u64,
    arena_idx: usize,
) -> Result<Box<dyn Negotiator>> {
    let truth = if side == 0 { &arena.utility_a } else { &arena.utility_b };
    match &entry.blueprint {
        AgentBlueprint::Baseline(kind) => {
            Ok(Box::new(BaselineAgent::new(kind, truth, &arena.domain, config)?))
        }
        AgentBlueprint::Adaptive { strategy, model, online, estimate } => {
            let (user_model, b_count) = match estimate {
                Some(_) => {
                    let (estimated, b_count) = estimates
                        .get((arena_idx, side, profile_idx))
                        .ok_or_else(|| Error::Config("missing user-model estimate".into()))?;
                    (estimated.clone(), *b_count)
                }
                None => (truth.clone(), arena.domain.outcome_count().min(u32::MAX as u64) as u32),
            };
            let agent = StrategyAgent::new(
                &entry.name,
                strategy.clone(),
                user_model,
                &arena.domain,
                config,
                model.clone(),
                *online,
                agent_seed,
            )?
            .with_profile_size(b_count);
            Ok(Box::new(agent))
        }
    }
}

/// Runs the full round-robin. Returns every session log plus aggregate and
/// per-pair metric rows; optionally writes `results.csv`, `summary.json`
/// and `sessions/*.jsonl` under `out_dir`.
pub fn run_tournament(t: &Tournament, out_dir: Option<&Path>) -> Result<(Vec<SessionLog>, TournamentReport)> {
    let n = t.roster.len();
    if n < 2 {
        return Err(Error::Config("a tournament needs at least two agents".into()));
    }
    let estimates = EstimateCache::build(t)?;

    let mut plans: Vec<SessionPlan> = Vec::new();
    let mut index = 0u64;
    for agent_x in 0..n {
        for agent_y in agent_x + 1..n {
            for arena in 0..t.arenas.len() {
                for profile in 0..t.profiles.len() {
                    for _repeat in 0..t.repeats {
                        for swapped in [false, true] {
                            plans.push(SessionPlan { agent_x, agent_y, arena, profile, swapped, index });
                            index += 1;
                        }
                    }
                }
            }
        }
    }
    let expected =
        expected_session_count(n, t.arenas.len(), t.repeats, t.profiles.len());
    debug_assert_eq!(plans.len() as u64, expected);

    // distinct streams per session, checked rather than assumed
    let seeds: Vec<u64> = plans.iter().map(|p| rng::derive(t.seed, p.index)).collect();
    {
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(Error::Config("session seed collision".into()));
        }
    }

    let logs: Vec<Result<SessionLog>> = par::map_indices(plans.len(), |i| {
        let plan = &plans[i];
        let arena = &t.arenas[plan.arena];
        let seed = seeds[i];
        let (first, second) =
            if plan.swapped { (plan.agent_y, plan.agent_x) } else { (plan.agent_x, plan.agent_y) };
        let mut agent_a = build_agent(
            &t.roster[first],
            arena,
            0,
            plan.profile,
            &estimates,
            &t.session,
            rng::derive(seed, 2),
            plan.arena,
        )?;
        let mut agent_b = build_agent(
            &t.roster[second],
            arena,
            1,
            plan.profile,
            &estimates,
            &t.session,
            rng::derive(seed, 3),
            plan.arena,
        )?;
        let setup = SessionSetup {
            domain: &arena.domain,
            utility_a: &arena.utility_a,
            utility_b: &arena.utility_b,
            config: t.session,
        };
        run_session(&setup, &mut *agent_a, &mut *agent_b, seed)
    });
    let logs: Vec<SessionLog> = logs.into_iter().collect::<Result<_>>()?;

    let rows = compute_metrics(&logs)?;
    let mut pair_groups: BTreeMap<(String, String), Vec<SessionLog>> = BTreeMap::new();
    for (plan, log) in plans.iter().zip(&logs) {
        let mut key =
            (t.roster[plan.agent_x].name.clone(), t.roster[plan.agent_y].name.clone());
        if key.1 < key.0 {
            std::mem::swap(&mut key.0, &mut key.1);
        }
        pair_groups.entry(key).or_default().push(log.clone());
    }
    let pairs = pair_groups
        .into_iter()
        .map(|((a, b), group)| {
            Ok(PairReport { agents: [a, b], rows: compute_metrics(&group)? })
        })
        .collect::<Result<Vec<_>>>()?;

    let report = TournamentReport {
        session_count: logs.len() as u64,
        expected_count: expected,
        rows,
        pairs,
    };
    if report.session_count != report.expected_count {
        return Err(Error::Config(format!(
            "session count {} disagrees with the n(n-1)/2·x·y·z·w formula ({})",
            report.session_count, report.expected_count
        )));
    }

    if let Some(dir) = out_dir {
        let sessions_dir = dir.join("sessions");
        std::fs::create_dir_all(&sessions_dir).map_err(|source| Error::Io {
            path: sessions_dir.display().to_string(),
            source,
        })?;
        for (plan, log) in plans.iter().zip(&logs) {
            let file = sessions_dir.join(format!("s{:06}.jsonl", plan.index));
            log.save_jsonl(file)?;
        }
        write_metrics_csv(&report.rows, dir.join("results.csv"))?;
        write_json(&dir.join("summary.json"), &report)?;
    }
    Ok((logs, report))
}

/// Runs teacher-vs-opponent sessions with tracing enabled and returns the
/// (features, concession target) pairs for supervised pretraining.
pub fn collect_teacher_dataset(
    arenas: &[Arena],
    teacher: BaselineKind,
    opponents: &[BaselineKind],
    sessions_per_pair: u32,
    config: &SessionConfig,
    seed: u64,
) -> Result<Vec<(Vec<f64>, f64)>> {
    let mut dataset = Vec::new();
    let mut stream = 0u64;
    for arena in arenas {
        for opponent in opponents {
            for _ in 0..sessions_per_pair {
                let session_seed = rng::derive(seed, stream);
                stream += 1;
                let mut tutor =
                    BaselineAgent::new(&teacher, &arena.utility_a, &arena.domain, config)?
                        .with_trace();
                let mut other =
                    BaselineAgent::new(opponent, &arena.utility_b, &arena.domain, config)?;
                let setup = SessionSetup {
                    domain: &arena.domain,
                    utility_a: &arena.utility_a,
                    utility_b: &arena.utility_b,
                    config: *config,
                };
                run_session(&setup, &mut tutor, &mut other, session_seed)?;
                dataset.extend(tutor.trace.iter().map(|(f, a)| (f.to_vec(), *a)));
            }
        }
    }
    if dataset.is_empty() {
        return Err(Error::Config("teacher sessions produced no trace".into()));
    }
    Ok(dataset)
}

/// Progress of online RL training.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RlReport {
    pub episodes: u32,
    /// Settled true utility per episode, in play order.
    pub utilities: Vec<f64>,
    pub replay_len: usize,
    pub train_steps: u64,
}

/// Plays `episodes` sessions with exploration and learning on, cycling
/// through arenas and opponents; the model accumulates experience across
/// episodes.
pub fn train_rl(
    model: DdpgModel,
    strategy: &ConcreteStrategy,
    arenas: &[Arena],
    opponents: &[BaselineKind],
    episodes: u32,
    config: &SessionConfig,
    seed: u64,
) -> Result<(DdpgModel, RlReport)> {
    if arenas.is_empty() || opponents.is_empty() {
        return Err(Error::Config("training needs arenas and opponents".into()));
    }
    let mut model = model;
    let mut utilities = Vec::with_capacity(episodes as usize);
    for episode in 0..episodes {
        let arena = &arenas[episode as usize % arenas.len()];
        let opponent = &opponents[(episode as usize / arenas.len()) % opponents.len()];
        let session_seed = rng::derive(seed, episode as u64);
        let mut learner = StrategyAgent::new(
            "learner",
            strategy.clone(),
            arena.utility_a.clone(),
            &arena.domain,
            config,
            Some(model),
            true,
            rng::derive(session_seed, 2),
        )?;
        let mut other = BaselineAgent::new(opponent, &arena.utility_b, &arena.domain, config)?;
        let setup = SessionSetup {
            domain: &arena.domain,
            utility_a: &arena.utility_a,
            utility_b: &arena.utility_b,
            config: *config,
        };
        let log = run_session(&setup, &mut learner, &mut other, session_seed)?;
        utilities.push(log.settlement.0);
        model = learner.into_model().expect("learner owns the model");
    }
    let report = RlReport {
        episodes,
        utilities,
        replay_len: model.replay_len(),
        train_steps: model.train_steps(),
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_shapes_multiply_out() {
        for omega in [48u64, 128, 180, 420, 1600, 3520, 3600, 15625] {
            let shape = preset_shape(omega).unwrap();
            let product: u64 = shape.iter().map(|&k| k as u64).product();
            assert_eq!(product, omega);
        }
        assert!(preset_shape(49).is_none());
    }

    #[test]
    fn generated_domains_land_in_their_bands() {
        for (i, opposition) in
            [Opposition::Low, Opposition::Medium, Opposition::High].iter().enumerate()
        {
            let g = gen_domain(&[4, 4, 3], *opposition, 100 + i as u64).unwrap();
            assert!(
                opposition.contains(g.opposition),
                "{opposition:?} missed: measured {}",
                g.opposition
            );
            assert_eq!(g.domain.outcome_count(), 48);
        }
    }

    #[test]
    fn high_opposition_single_issue_reverses_preferences() {
        let g = gen_domain(&[4], Opposition::High, 5).unwrap();
        assert!(g.opposition > 0.4);
    }

    #[test]
    fn session_count_formula() {
        assert_eq!(expected_session_count(4, 3, 20, 2), 1440);
        assert_eq!(expected_session_count(2, 1, 1, 1), 2);
    }

    fn small_config(seed: u64) -> TournamentConfig {
        TournamentConfig {
            agents: vec![
                AgentConfig::Boulware { exponent: 0.2 },
                AgentConfig::Conceder { exponent: 2.0 },
                AgentConfig::Hardliner { threshold: 0.8 },
            ],
            domains: vec![DomainConfig::Synthetic {
                name: "d6".into(),
                issues: vec![3, 2],
                opposition: Opposition::Medium,
                gen_seed: Some(11),
            }],
            profiles: vec![0.5],
            repeats: 2,
            session: SessionConfig::new(60, 0.1, 1.0, 0.95).unwrap(),
            seed,
        }
    }

    #[test]
    fn tournament_session_count_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(9);
        let tournament = config.resolve(dir.path()).unwrap();
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        let (_, report_a) = run_tournament(&tournament, Some(&out_a)).unwrap();
        let (_, _report_b) = run_tournament(&tournament, Some(&out_b)).unwrap();
        assert_eq!(report_a.session_count, 12); // 3·2/2 · 2 · 1 · 2 · 1
        assert_eq!(report_a.session_count, report_a.expected_count);

        let csv_a = std::fs::read(out_a.join("results.csv")).unwrap();
        let csv_b = std::fs::read(out_b.join("results.csv")).unwrap();
        assert_eq!(csv_a, csv_b, "results.csv must be byte-identical");
        let summary_a = std::fs::read(out_a.join("summary.json")).unwrap();
        let summary_b = std::fs::read(out_b.join("summary.json")).unwrap();
        assert_eq!(summary_a, summary_b);
        for i in 0..report_a.session_count {
            let name = format!("sessions/s{i:06}.jsonl");
            let la = std::fs::read(out_a.join(&name)).unwrap();
            let lb = std::fs::read(out_b.join(&name)).unwrap();
            assert_eq!(la, lb, "{name} differs");
        }
    }

    #[test]
    fn tournament_config_roundtrips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(3);
        let path = dir.path().join("t.json");
        write_json(&path, &config).unwrap();
        let loaded = TournamentConfig::load(&path).unwrap();
        assert_eq!(loaded.seed, 3);
        assert_eq!(loaded.agents.len(), 3);
        loaded.resolve(dir.path()).unwrap();
    }

    #[test]
    fn duplicate_agent_names_are_rejected() {
        let mut config = small_config(4);
        config.agents = vec![
            AgentConfig::Boulware { exponent: 0.2 },
            AgentConfig::Boulware { exponent: 0.2 },
        ];
        let dir = tempfile::tempdir().unwrap();
        assert!(config.resolve(dir.path()).is_err());
    }

    #[test]
    fn conflicting_estimation_settings_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(6);
        for (name, pop) in [("a1", 8), ("a2", 12)] {
            config.agents.push(AgentConfig::Adaptive {
                name: Some(name.into()),
                strategy: None,
                model: None,
                online: false,
                estimate: true,
                fa: Some(FaParams { population: pop, generations: 5, ..Default::default() }),
            });
        }
        let tournament = config.resolve(dir.path()).unwrap();
        assert!(run_tournament(&tournament, None).is_err());
    }

    #[test]
    fn adaptive_agents_play_in_tournaments() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(5);
        config.agents.push(AgentConfig::Adaptive {
            name: Some("adaptive".into()),
            strategy: None,
            model: None,
            online: false,
            estimate: true,
            fa: Some(FaParams { population: 8, generations: 10, ..Default::default() }),
        });
        config.profiles = vec![0.4];
        config.repeats = 1;
        let tournament = config.resolve(dir.path()).unwrap();
        let (logs, report) = run_tournament(&tournament, None).unwrap();
        assert_eq!(report.session_count, 12); // 4·3/2 · 2 · 1 · 1 · 1
        assert!(report.rows.iter().any(|r| r.agent == "adaptive"));
        for log in &logs {
            log.verify().unwrap();
        }
    }

    #[test]
    fn teacher_dataset_is_nonempty_and_bounded() {
        let g = gen_domain(&[3, 3], Opposition::Medium, 21).unwrap();
        let arenas = vec![Arena {
            name: "train".into(),
            domain: g.domain,
            utility_a: g.utility_a,
            utility_b: g.utility_b,
        }];
        let config = SessionConfig::new(40, 0.1, 1.0, 0.95).unwrap();
        let dataset = collect_teacher_dataset(
            &arenas,
            BaselineKind::FrequencyTeacher { window: 5 },
            &[BaselineKind::Boulware { exponent: 0.2 }],
            3,
            &config,
            7,
        )
        .unwrap();
        assert!(!dataset.is_empty());
        for (features, target) in &dataset {
            assert_eq!(features.len(), crate::drl::STATE_DIM);
            assert!((0.0..=1.0).contains(target));
        }
    }

    #[test]
    fn online_rl_runs_and_accumulates_experience() {
        let g = gen_domain(&[3, 3], Opposition::Low, 31).unwrap();
        let arenas = vec![Arena {
            name: "train".into(),
            domain: g.domain,
            utility_a: g.utility_a,
            utility_b: g.utility_b,
        }];
        let config = SessionConfig::new(30, 0.1, 1.0, 0.95).unwrap();
        let model = DdpgModel::new(
            crate::drl::DdpgConfig { hidden: [8, 8], capacity: 512, batch: 8, ..Default::default() },
            1,
        )
        .unwrap();
        let (model, report) = train_rl(
            model,
            &ConcreteStrategy::example(),
            &arenas,
            &[BaselineKind::Conceder { exponent: 2.0 }],
            5,
            &config,
            13,
        )
        .unwrap();
        assert_eq!(report.episodes, 5);
        assert_eq!(report.utilities.len(), 5);
        assert!(model.replay_len() > 0);
        assert!(model.all_finite());
    }
}
