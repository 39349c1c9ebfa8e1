//! Command-line front end: domain generation, user-model estimation,
//! Pareto fronts, template learning, DRL pretraining and training, single
//! sessions, tournaments, metric aggregation and log replay.
//!
//! Usage errors exit with code 2 (clap's default); runtime failures exit
//! with code 1.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use bargain::agents::BaselineKind;
use bargain::domain::{
    load_partial_profile, sample_partial_profile, Domain, LinearAdditiveUtility,
    PartialPreferenceProfile, SessionConfig, UtilityProfile,
};
use bargain::drl::{DdpgConfig, DdpgModel};
use bargain::meta::firefly::FaParams;
use bargain::meta::nsga2::Nsga2Params;
use bargain::metrics::{compute_metrics, metrics_to_csv};
use bargain::opponent_model::FrequencyModel;
use bargain::pareto::{approximate_front, brute_force_front, igd, ENUMERATION_CAP};
use bargain::protocol::{run_session, SessionLog, SessionSetup};
use bargain::strategy::{
    learn_template_params, render_strategy, ConcreteStrategy, LearnParams, StrategyTemplate,
    TrainingScenario,
};
use bargain::tournament::{
    collect_teacher_dataset, gen_domain, preset_shape, run_tournament, train_rl, Arena,
    Opposition, TournamentConfig,
};
use bargain::user_model::{cardinal_inaccuracy, estimate_user_model, ordinal_accuracy};

#[derive(Parser)]
#[command(name = "bargain", version, about = "Bilateral multi-issue negotiation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct FaArgs {
    /// Firefly population size.
    #[arg(long, default_value_t = 20)]
    population: usize,
    /// Firefly generations.
    #[arg(long, default_value_t = 200)]
    generations: usize,
}

impl FaArgs {
    fn params(&self, seed: u64) -> FaParams {
        FaParams { population: self.population, generations: self.generations, ..Default::default() }
            .with_seed(seed)
    }
}

#[derive(Args, Clone)]
struct SessionArgs {
    /// Deadline in rounds.
    #[arg(long, default_value_t = 2000)]
    deadline: u32,
    /// Reservation utility paid on failure.
    #[arg(long, default_value_t = 0.1)]
    reservation: f64,
    /// Discount applied to agreed bids.
    #[arg(long, default_value_t = 1.0)]
    discount: f64,
    /// The agent's internal temporal discount.
    #[arg(long, default_value_t = 0.95)]
    agent_discount: f64,
}

impl SessionArgs {
    fn config(&self) -> Result<SessionConfig> {
        Ok(SessionConfig::new(self.deadline, self.reservation, self.discount, self.agent_discount)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a domain and two true utility profiles in an opposition band.
    GenDomain {
        /// Per-issue value counts, e.g. 4,4,3.
        #[arg(long, value_delimiter = ',', conflicts_with = "omega")]
        issues: Option<Vec<usize>>,
        /// Outcome-count preset (48, 128, 180, 420, 1600, 3520, 3600, 15625).
        #[arg(long)]
        omega: Option<u64>,
        #[arg(long, value_enum, default_value = "medium")]
        opposition: OppositionArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for domain.json, profile_a.json, profile_b.json.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        reservation: f64,
        #[arg(long, default_value_t = 1.0)]
        discount: f64,
    },
    /// Estimate a user model from a partial preference ranking.
    EstimateUserModel {
        #[arg(long)]
        domain: PathBuf,
        /// True profile JSON; a partial profile is sampled from it.
        #[arg(long, conflicts_with = "partial")]
        profile: Option<PathBuf>,
        /// Pre-sampled partial profile JSON (ascending bids).
        #[arg(long)]
        partial: Option<PathBuf>,
        /// |B| as a fraction of |Ω| when sampling from --profile.
        #[arg(long, default_value_t = 0.1)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        fa: FaArgs,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Approximate the Pareto front and score it against brute force.
    Pareto {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        /// Opponent profile; mutually exclusive with --opponent-uniform.
        #[arg(long, conflicts_with = "opponent_uniform")]
        profile_b: Option<PathBuf>,
        /// Score the opponent with the optimistic uniform prior.
        #[arg(long)]
        opponent_uniform: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use the wider offline search budget (population 100, 25
        /// generations) instead of the per-turn budget.
        #[arg(long)]
        offline_budget: bool,
        #[arg(long, value_enum, default_value = "json")]
        format: OutputFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Learn strategy-template parameters against a baseline roster.
    LearnTemplate {
        /// Arena triple domain.json:profile_a.json:profile_b.json (repeat).
        #[arg(long = "arena", required = true)]
        arenas: Vec<String>,
        /// Opponent specs, e.g. boulware:0.2,conceder:2.0,hardliner:0.8.
        #[arg(long, value_delimiter = ',', default_value = "boulware:0.2,conceder:2.0,hardliner:0.8")]
        opponents: Vec<String>,
        /// DDPG checkpoint backing the DRL-threshold tactic.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        repeats: u32,
        #[command(flatten)]
        fa: FaArgs,
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Strategy JSON output.
        #[arg(long)]
        out: PathBuf,
    },
    /// Pretrain the DDPG actor on logged teacher sessions.
    Pretrain {
        #[arg(long = "arena", required = true)]
        arenas: Vec<String>,
        /// Teacher spec (default teacher:10).
        #[arg(long, default_value = "teacher:10")]
        teacher: String,
        #[arg(long, value_delimiter = ',', default_value = "boulware:0.2,conceder:2.0,hardliner:0.8")]
        opponents: Vec<String>,
        /// Sessions per (arena, opponent) pair.
        #[arg(long, default_value_t = 4)]
        sessions: u32,
        #[arg(long, default_value_t = 300)]
        epochs: usize,
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run online RL episodes, updating a DDPG checkpoint.
    TrainRl {
        /// Starting checkpoint; fresh networks when absent.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Strategy to play while learning.
        #[arg(long)]
        strategy: Option<PathBuf>,
        #[arg(long = "arena", required = true)]
        arenas: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "boulware:0.2,conceder:2.0")]
        opponents: Vec<String>,
        #[arg(long, default_value_t = 20)]
        episodes: u32,
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a single session between two agents.
    Run {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        profile_a: PathBuf,
        #[arg(long)]
        profile_b: PathBuf,
        /// Agent spec: boulware:E, conceder:E, hardliner:T, random,
        /// teacher:W, or adaptive.
        #[arg(long)]
        agent_a: String,
        #[arg(long)]
        agent_b: String,
        /// Strategy JSON for adaptive agents.
        #[arg(long)]
        strategy: Option<PathBuf>,
        /// DDPG checkpoint for adaptive agents.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Estimate the user model from this |B| fraction instead of using
        /// the true profile.
        #[arg(long)]
        fraction: Option<f64>,
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Session log (JSONL) output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a configuration-driven round-robin tournament.
    Tournament {
        #[arg(long)]
        config: PathBuf,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate metrics from session logs.
    Metrics {
        /// Directory of *.jsonl session logs (or a single file).
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify a session log and print its settlement and metrics.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum OppositionArg {
    Low,
    Medium,
    High,
}

impl From<OppositionArg> for Opposition {
    fn from(value: OppositionArg) -> Self {
        match value {
            OppositionArg::Low => Opposition::Low,
            OppositionArg::Medium => Opposition::Medium,
            OppositionArg::High => Opposition::High,
        }
    }
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum OutputFormat {
    Json,
    Csv,
}

fn parse_baseline(spec: &str) -> Result<BaselineKind> {
    let mut parts = spec.splitn(2, ':');
    let kind = parts.next().unwrap_or_default();
    let arg = parts.next();
    let numeric = |a: Option<&str>| -> Result<f64> {
        a.ok_or_else(|| anyhow!("spec {spec:?} needs a numeric argument"))?
            .parse::<f64>()
            .with_context(|| format!("bad numeric argument in {spec:?}"))
    };
    Ok(match kind {
        "boulware" => BaselineKind::Boulware { exponent: numeric(arg)? },
        "conceder" => BaselineKind::Conceder { exponent: numeric(arg)? },
        "hardliner" => BaselineKind::Hardliner { threshold: numeric(arg)? },
        "random" => BaselineKind::Random,
        "teacher" => BaselineKind::FrequencyTeacher { window: numeric(arg)? as usize },
        other => bail!("unknown agent spec {other:?}"),
    })
}

fn parse_arena(spec: &str) -> Result<Arena> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        bail!("arena spec {spec:?} must be domain.json:profile_a.json:profile_b.json");
    }
    let domain = Domain::load(parts[0])?;
    let pa = UtilityProfile::load(parts[1])?;
    let pb = UtilityProfile::load(parts[2])?;
    Ok(Arena { name: domain.name.clone(), domain, utility_a: pa.utility, utility_b: pb.utility })
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn load_profile_pair(domain_path: &Path, profile_path: &Path) -> Result<(Domain, UtilityProfile)> {
    let domain = Domain::load(domain_path)?;
    let profile = UtilityProfile::load(profile_path)?;
    if profile.utility.issue_count() != domain.issue_count() {
        bail!(
            "profile {} has {} issues, domain {} has {}",
            profile_path.display(),
            profile.utility.issue_count(),
            domain.name,
            domain.issue_count()
        );
    }
    Ok((domain, profile))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::GenDomain { issues, omega, opposition, seed, out, reservation, discount } => {
            let shape: Vec<usize> = match (issues, omega) {
                (Some(counts), _) => counts,
                (None, Some(omega)) => preset_shape(omega)
                    .ok_or_else(|| anyhow!("no preset shape for |Ω| = {omega}"))?
                    .to_vec(),
                (None, None) => bail!("one of --issues or --omega is required"),
            };
            let generated = gen_domain(&shape, opposition.into(), seed)?;
            std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            generated.domain.save(out.join("domain.json"))?;
            for (file, utility) in
                [("profile_a.json", &generated.utility_a), ("profile_b.json", &generated.utility_b)]
            {
                UtilityProfile {
                    domain: generated.domain.name.clone(),
                    utility: utility.clone(),
                    reservation,
                    discount,
                }
                .save(out.join(file))?;
            }
            println!(
                "{}",
                serde_json::json!({
                    "domain": generated.domain.name,
                    "outcomes": generated.domain.outcome_count(),
                    "opposition": generated.opposition,
                    "out": out.display().to_string(),
                })
            );
            Ok(())
        }

        Command::EstimateUserModel { domain, profile, partial, fraction, seed, fa, out } => {
            let domain = Domain::load(&domain)?;
            let (partial_profile, truth): (PartialPreferenceProfile, Option<LinearAdditiveUtility>) =
                match (profile, partial) {
                    (Some(profile_path), None) => {
                        let truth = UtilityProfile::load(&profile_path)?;
                        let sampled =
                            sample_partial_profile(&truth.utility, &domain, fraction, seed)?;
                        (sampled, Some(truth.utility))
                    }
                    (None, Some(partial_path)) => {
                        (load_partial_profile(&partial_path, &domain)?, None)
                    }
                    _ => bail!("exactly one of --profile or --partial is required"),
                };
            let report = estimate_user_model(&domain, &partial_profile, &fa.params(seed))?;
            let mut payload = serde_json::json!({
                "estimated": report.estimated,
                "rho_on_b": report.rho_on_b,
                "evaluations_used": report.evaluations_used,
                "b_count": partial_profile.len(),
            });
            if let Some(truth) = truth {
                payload["ordinal_accuracy"] =
                    ordinal_accuracy(&report.estimated, &truth, &domain)?.into();
                payload["cardinal_inaccuracy"] =
                    cardinal_inaccuracy(&report.estimated, &truth).into();
            }
            write_or_print(out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&payload)?))
        }

        Command::Pareto {
            domain,
            profile,
            profile_b,
            opponent_uniform,
            seed,
            offline_budget,
            format,
            out,
        } => {
            let (domain, own) = load_profile_pair(&domain, &profile)?;
            let opponent_utility: Box<dyn Fn(&bargain::domain::Bid) -> f64 + Sync> =
                match (&profile_b, opponent_uniform) {
                    (Some(path), _) => {
                        let other = UtilityProfile::load(path)?;
                        Box::new(move |bid| other.utility.utility(bid).unwrap_or(0.0))
                    }
                    (None, true) => {
                        let model = FrequencyModel::new(&domain, 10)?;
                        Box::new(move |bid| model.utility(bid).unwrap_or(0.0))
                    }
                    (None, false) => bail!("one of --profile-b or --opponent-uniform is required"),
                };
            let own_utility = own.utility.clone();
            let evaluate = |bid: &bargain::domain::Bid| {
                (own_utility.utility(bid).unwrap_or(0.0), opponent_utility(bid))
            };
            let params = if offline_budget {
                Nsga2Params::offline(seed)
            } else {
                Nsga2Params::per_turn(domain.outcome_count(), seed)
            };
            let approx = approximate_front(evaluate, &domain, &params)?;
            let igd_value = if domain.outcome_count() <= ENUMERATION_CAP {
                let truth = brute_force_front(evaluate, &domain, ENUMERATION_CAP)?;
                Some(igd(&approx, &truth)?)
            } else {
                None
            };
            let text = match format {
                OutputFormat::Json => {
                    let payload = serde_json::json!({
                        "population": params.population,
                        "generations": params.generations,
                        "front": approx,
                        "igd_vs_brute_force": igd_value,
                    });
                    format!("{}\n", serde_json::to_string_pretty(&payload)?)
                }
                OutputFormat::Csv => {
                    let mut text = String::from("own,opponent,bid\n");
                    for entry in approx.entries() {
                        text.push_str(&format!("{},{},{}\n", entry.own, entry.opponent, entry.bid));
                    }
                    if let Some(v) = igd_value {
                        text.push_str(&format!("igd,{v},\n"));
                    }
                    text
                }
            };
            write_or_print(out.as_deref(), &text)
        }

        Command::LearnTemplate { arenas, opponents, model, repeats, fa, session, seed, out } => {
            let arenas: Vec<Arena> =
                arenas.iter().map(|s| parse_arena(s)).collect::<Result<_>>()?;
            let opponents: Vec<BaselineKind> =
                opponents.iter().map(|s| parse_baseline(s)).collect::<Result<_>>()?;
            let model = model.map(DdpgModel::load).transpose()?;
            let scenarios: Vec<TrainingScenario> = arenas
                .iter()
                .flat_map(|arena| {
                    opponents.iter().map(move |opponent| TrainingScenario {
                        domain: arena.domain.clone(),
                        own_utility: arena.utility_a.clone(),
                        opponent_utility: arena.utility_b.clone(),
                        opponent: (*opponent).into(),
                    })
                })
                .collect();
            let params =
                LearnParams { session: session.config()?, repeats, seed, fa: fa.params(seed) };
            let template = StrategyTemplate::standard();
            let learned = learn_template_params(
                &template,
                &scenarios,
                model.as_ref(),
                &params,
                &[ConcreteStrategy::example()],
            )?;
            learned.strategy.save(&out)?;
            eprintln!("fitness {:.4} over {} evaluations", learned.fitness, learned.evaluations);
            print!("{}", render_strategy(&learned.strategy));
            Ok(())
        }

        Command::Pretrain { arenas, teacher, opponents, sessions, epochs, session, seed, out } => {
            let arenas: Vec<Arena> =
                arenas.iter().map(|s| parse_arena(s)).collect::<Result<_>>()?;
            let teacher = parse_baseline(&teacher)?;
            let opponents: Vec<BaselineKind> =
                opponents.iter().map(|s| parse_baseline(s)).collect::<Result<_>>()?;
            let config = session.config()?;
            let dataset =
                collect_teacher_dataset(&arenas, teacher, &opponents, sessions, &config, seed)?;
            let mut model = DdpgModel::new(DdpgConfig::default(), seed)?;
            let curve = model.pretrain_supervised(&dataset, epochs, seed)?;
            model.save(&out)?;
            println!(
                "{}",
                serde_json::json!({
                    "dataset": dataset.len(),
                    "epochs": epochs,
                    "initial_loss": curve.first(),
                    "final_loss": curve.last(),
                    "out": out.display().to_string(),
                })
            );
            Ok(())
        }

        Command::TrainRl { model, strategy, arenas, opponents, episodes, session, seed, out } => {
            let arenas: Vec<Arena> =
                arenas.iter().map(|s| parse_arena(s)).collect::<Result<_>>()?;
            let opponents: Vec<BaselineKind> =
                opponents.iter().map(|s| parse_baseline(s)).collect::<Result<_>>()?;
            let model = match model {
                Some(path) => DdpgModel::load(path)?,
                None => DdpgModel::new(DdpgConfig::default(), seed)?,
            };
            let strategy = match strategy {
                Some(path) => ConcreteStrategy::load(path)?,
                None => ConcreteStrategy::example(),
            };
            let config = session.config()?;
            let (model, report) =
                train_rl(model, &strategy, &arenas, &opponents, episodes, &config, seed)?;
            model.save(&out)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }

        Command::Run {
            domain,
            profile_a,
            profile_b,
            agent_a,
            agent_b,
            strategy,
            model,
            fraction,
            session,
            seed,
            out,
        } => {
            let (domain, pa) = load_profile_pair(&domain, &profile_a)?;
            let pb = UtilityProfile::load(&profile_b)?;
            if (pa.reservation - pb.reservation).abs() > 1e-12
                || (pa.discount - pb.discount).abs() > 1e-12
            {
                bail!(
                    "profiles disagree on session constants: reservation {} vs {}, discount {} vs {}",
                    pa.reservation, pb.reservation, pa.discount, pb.discount
                );
            }
            let config = SessionConfig::new(
                session.deadline,
                pa.reservation,
                pa.discount,
                session.agent_discount,
            )?;
            let strategy = match &strategy {
                Some(path) => ConcreteStrategy::load(path)?,
                None => ConcreteStrategy::example(),
            };
            let model = model.as_ref().map(DdpgModel::load).transpose()?;
            let build = |spec: &str,
                         truth: &LinearAdditiveUtility,
                         side_seed: u64|
             -> Result<Box<dyn bargain::protocol::Negotiator>> {
                if spec == "adaptive" {
                    let user_model = match fraction {
                        Some(fraction) => {
                            let partial =
                                sample_partial_profile(truth, &domain, fraction, side_seed)?;
                            estimate_user_model(
                                &domain,
                                &partial,
                                &FaParams::default().with_seed(side_seed),
                            )?
                            .estimated
                        }
                        None => truth.clone(),
                    };
                    let model = match &model {
                        Some(m) => Some(m.clone()),
                        None if strategy.needs_drl() => {
                            Some(DdpgModel::new(DdpgConfig::default(), side_seed)?)
                        }
                        None => None,
                    };
                    Ok(Box::new(bargain::agents::StrategyAgent::new(
                        "adaptive",
                        strategy.clone(),
                        user_model,
                        &domain,
                        &config,
                        model,
                        false,
                        side_seed,
                    )?))
                } else {
                    let kind = parse_baseline(spec)?;
                    Ok(bargain::agents::build_baseline(&kind, truth, &domain, &config)?)
                }
            };
            let mut first = build(&agent_a, &pa.utility, bargain::rng::derive(seed, 100))?;
            let mut second = build(&agent_b, &pb.utility, bargain::rng::derive(seed, 101))?;
            let setup = SessionSetup {
                domain: &domain,
                utility_a: &pa.utility,
                utility_b: &pb.utility,
                config,
            };
            let log = run_session(&setup, &mut *first, &mut *second, seed)?;
            match &out {
                Some(path) => log.save_jsonl(path)?,
                None => print!("{}", log.to_jsonl()),
            }
            eprintln!(
                "outcome: {:?}, settlement: ({:.4}, {:.4})",
                log.outcome, log.settlement.0, log.settlement.1
            );
            Ok(())
        }

        Command::Tournament { config, seed, out } => {
            let mut parsed = TournamentConfig::load(&config)?;
            if let Some(seed) = seed {
                parsed.seed = seed;
            }
            let base = config.parent().unwrap_or(Path::new("."));
            let tournament = parsed.resolve(base)?;
            let (_, report) = run_tournament(&tournament, Some(&out))?;
            println!(
                "{}",
                serde_json::json!({
                    "sessions": report.session_count,
                    "agents": report.rows.iter().map(|r| r.agent.clone()).collect::<Vec<_>>(),
                    "out": out.display().to_string(),
                })
            );
            Ok(())
        }

        Command::Metrics { sessions, out } => {
            let mut paths: Vec<PathBuf> = if sessions.is_dir() {
                std::fs::read_dir(&sessions)
                    .with_context(|| format!("reading {}", sessions.display()))?
                    .filter_map(|entry| entry.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
                    .collect()
            } else {
                vec![sessions.clone()]
            };
            paths.sort();
            if paths.is_empty() {
                bail!("no .jsonl session logs under {}", sessions.display());
            }
            let logs: Vec<SessionLog> =
                paths.iter().map(SessionLog::load_jsonl).collect::<bargain::Result<_>>()?;
            let rows = compute_metrics(&logs)?;
            write_or_print(out.as_deref(), &metrics_to_csv(&rows))
        }

        Command::Replay { log } => {
            let session = SessionLog::load_jsonl(&log)?;
            let recomputed = session.verify()?;
            let rows = compute_metrics(std::slice::from_ref(&session))?;
            println!(
                "{}",
                serde_json::json!({
                    "agents": session.agents,
                    "outcome": session.outcome,
                    "turns": session.turns.len(),
                    "settlement": { "logged": session.settlement, "recomputed": recomputed },
                    "metrics_csv": metrics_to_csv(&rows),
                })
            );
            Ok(())
        }
    }
}
