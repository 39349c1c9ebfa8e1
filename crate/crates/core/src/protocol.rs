//! Alternating-offers session driver.
//!
//! Agents strictly alternate turns; a counter-offer implicitly rejects the
//! pending offer. The session ends on an accept or when the round deadline
//! passes, after which both sides settle: the discounted true utility of the
//! agreed bid, or the reservation value on failure. Agents see only their
//! own state, the opponent's last bid and the normalized time — never the
//! opponent's utility.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{discounted_utility, Bid, Domain, LinearAdditiveUtility, SessionConfig};
use crate::error::{Error, Result};
use crate::rng;

/// A legal move: counter-offer or accept the pending offer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Offer(Bid),
    Accept,
}

/// How a session ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Agreement { bid: Bid, round: u32 },
    Failure,
}

impl Outcome {
    pub fn is_agreement(&self) -> bool {
        matches!(self, Outcome::Agreement { .. })
    }
}

/// Everything an agent may react to when the session settles.
#[derive(Debug, Clone)]
pub struct SessionEnd {
    pub outcome: Outcome,
    /// Normalized time at settlement (1.0 on failure).
    pub t: f64,
}

/// A negotiating agent. One instance per session; implementations keep
/// whatever per-session state they need.
pub trait Negotiator {
    fn name(&self) -> &str;

    /// Decide the action for this turn. `pending` is the opponent's current
    /// offer, absent only on the session's very first turn.
    fn act(&mut self, t: f64, pending: Option<&Bid>, rng: &mut rng::Rng) -> Action;

    /// Notification after settlement; default is to ignore it.
    fn session_ended(&mut self, _end: &SessionEnd) {}
}

/// Rolling view of the negotiation an agent keeps between turns: statistics
/// of the opponent's bids (under the agent's own estimated utility), the
/// session constants, and the clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    /// Best opponent-bid utility seen so far.
    pub o_best: f64,
    /// Running mean of opponent-bid utilities.
    pub o_avg: f64,
    /// Running population standard deviation of opponent-bid utilities.
    pub o_sd: f64,
    /// Number of opponent bids observed.
    pub o_count: u32,
    /// |B|, the size of the partial preference profile.
    pub b_count: u32,
    /// d_D.
    pub discount: f64,
    /// u_res.
    pub reservation: f64,
    /// |Ω|.
    pub omega_size: u64,
    /// Number of issues.
    pub n_issues: usize,
    /// Normalized time of the current turn.
    pub t: f64,
    /// Welford accumulator backing `o_sd`.
    m2: f64,
}

impl AgentState {
    pub fn initial(b_count: u32, config: &SessionConfig, domain: &Domain) -> Self {
        AgentState {
            o_best: 0.0,
            o_avg: 0.0,
            o_sd: 0.0,
            o_count: 0,
            b_count,
            discount: config.discount,
            reservation: config.reservation,
            omega_size: domain.outcome_count(),
            n_issues: domain.issue_count(),
            t: 0.0,
            m2: 0.0,
        }
    }

    /// Folds one opponent-bid utility into the running statistics and
    /// advances the clock.
    pub fn updated(&self, opponent_bid_utility: f64, t: f64) -> Self {
        let mut next = *self;
        next.t = t;
        next.o_count += 1;
        next.o_best = next.o_best.max(opponent_bid_utility);
        let delta = opponent_bid_utility - next.o_avg;
        next.o_avg += delta / next.o_count as f64;
        next.m2 += delta * (opponent_bid_utility - next.o_avg);
        next.o_sd = (next.m2 / next.o_count as f64).max(0.0).sqrt();
        next
    }

    /// Advances the clock without observing a bid.
    pub fn at_time(&self, t: f64) -> Self {
        AgentState { t, ..*self }
    }
}

/// One logged turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub round: u32,
    /// 0 for the first mover, 1 for the responder.
    pub actor: usize,
    pub action: Action,
    pub t: f64,
}

/// Complete, replayable record of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub domain: Domain,
    pub config: SessionConfig,
    pub agents: [String; 2],
    pub utilities: [LinearAdditiveUtility; 2],
    pub turns: Vec<TurnRecord>,
    pub outcome: Outcome,
    /// Discounted true utility per side (reservation on failure).
    pub settlement: (f64, f64),
}

/// Immutable per-session context.
#[derive(Debug, Clone, Copy)]
pub struct SessionSetup<'a> {
    pub domain: &'a Domain,
    pub utility_a: &'a LinearAdditiveUtility,
    pub utility_b: &'a LinearAdditiveUtility,
    pub config: SessionConfig,
}

/// Settlement utilities implied by an outcome.
pub fn settle(
    outcome: &Outcome,
    config: &SessionConfig,
    utility_a: &LinearAdditiveUtility,
    utility_b: &LinearAdditiveUtility,
) -> Result<(f64, f64)> {
    match outcome {
        Outcome::Agreement { bid, round } => {
            let t = config.time_of_round(*round);
            Ok((
                discounted_utility(utility_a.utility(bid)?, t, config.discount)?,
                discounted_utility(utility_b.utility(bid)?, t, config.discount)?,
            ))
        }
        Outcome::Failure => Ok((config.reservation, config.reservation)),
    }
}

/// Runs one alternating-offers session to completion. Deterministic per
/// seed: each agent draws from its own derived stream.
pub fn run_session(
    setup: &SessionSetup,
    agent_a: &mut dyn Negotiator,
    agent_b: &mut dyn Negotiator,
    seed: u64,
) -> Result<SessionLog> {
    setup.config.validate()?;
    let mut rng_a = rng::stream(seed, 0);
    let mut rng_b = rng::stream(seed, 1);
    let mut turns: Vec<TurnRecord> = Vec::new();
    let mut pending: Option<Bid> = None;
    let mut outcome = Outcome::Failure;
    let mut end_t = 1.0;

    for round in 1..=setup.config.deadline_rounds {
        let actor = ((round - 1) % 2) as usize;
        let t = setup.config.time_of_round(round);
        let action = if actor == 0 {
            agent_a.act(t, pending.as_ref(), &mut rng_a)
        } else {
            agent_b.act(t, pending.as_ref(), &mut rng_b)
        };
        let actor_name = if actor == 0 { agent_a.name() } else { agent_b.name() };
        match &action {
            Action::Accept => {
                let bid = pending.take().ok_or_else(|| Error::ProtocolViolation {
                    actor: actor_name.to_string(),
                    round,
                    reason: "accept with no offer pending".into(),
                })?;
                turns.push(TurnRecord { round, actor, action: Action::Accept, t });
                outcome = Outcome::Agreement { bid, round };
                end_t = t;
                break;
            }
            Action::Offer(bid) => {
                setup.domain.check_bid(bid).map_err(|e| Error::ProtocolViolation {
                    actor: actor_name.to_string(),
                    round,
                    reason: e.to_string(),
                })?;
                pending = Some(bid.clone());
                turns.push(TurnRecord { round, actor, action, t });
            }
        }
    }

    let settlement = settle(&outcome, &setup.config, setup.utility_a, setup.utility_b)?;
    let end = SessionEnd { outcome: outcome.clone(), t: end_t };
    agent_a.session_ended(&end);
    agent_b.session_ended(&end);

    Ok(SessionLog {
        domain: setup.domain.clone(),
        config: setup.config,
        agents: [agent_a.name().to_string(), agent_b.name().to_string()],
        utilities: [setup.utility_a.clone(), setup.utility_b.clone()],
        turns,
        outcome,
        settlement,
    })
}

/// One line of the JSONL session format.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LogLine {
    Header {
        domain: Domain,
        config: SessionConfig,
        agents: [String; 2],
        utilities: [LinearAdditiveUtility; 2],
    },
    Turn(TurnRecord),
    Settlement { outcome: Outcome, utilities: (f64, f64) },
}

impl SessionLog {
    /// One turn per line; header first, settlement record last.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: &LogLine| {
            out.push_str(&serde_json::to_string(line).expect("serializable"));
            out.push('\n');
        };
        push(&LogLine::Header {
            domain: self.domain.clone(),
            config: self.config,
            agents: self.agents.clone(),
            utilities: self.utilities.clone(),
        });
        for turn in &self.turns {
            push(&LogLine::Turn(turn.clone()));
        }
        push(&LogLine::Settlement { outcome: self.outcome.clone(), utilities: self.settlement });
        out
    }

    pub fn save_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        file.write_all(self.to_jsonl().as_bytes()).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut header: Option<(Domain, SessionConfig, [String; 2], [LinearAdditiveUtility; 2])> =
            None;
        let mut turns = Vec::new();
        let mut settlement: Option<(Outcome, (f64, f64))> = None;
        for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: LogLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                detail: format!("line {}: {}", idx + 1, e),
            })?;
            match parsed {
                LogLine::Header { domain, config, agents, utilities } => {
                    header = Some((domain, config, agents, utilities));
                }
                LogLine::Turn(t) => turns.push(t),
                LogLine::Settlement { outcome, utilities } => {
                    settlement = Some((outcome, utilities));
                }
            }
        }
        let (domain, config, agents, utilities) = header.ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            detail: "missing header record".into(),
        })?;
        let (outcome, settlement) = settlement.ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            detail: "missing settlement record".into(),
        })?;
        Ok(SessionLog { domain, config, agents, utilities, turns, outcome, settlement })
    }

    /// Recomputes the settlement from the logged turns and embedded
    /// utilities; errors when the log is internally inconsistent.
    pub fn verify(&self) -> Result<(f64, f64)> {
        for pair in self.turns.windows(2) {
            if pair[0].actor == pair[1].actor {
                return Err(Error::ProtocolViolation {
                    actor: self.agents[pair[1].actor].clone(),
                    round: pair[1].round,
                    reason: "actors did not alternate".into(),
                });
            }
        }
        let replayed = match self.turns.last() {
            Some(TurnRecord { action: Action::Accept, round, actor, .. }) => {
                let offer = self.turns.iter().rev().find_map(|t| match &t.action {
                    Action::Offer(bid) => Some(bid.clone()),
                    Action::Accept => None,
                });
                let bid = offer.ok_or_else(|| Error::ProtocolViolation {
                    actor: self.agents[*actor].clone(),
                    round: *round,
                    reason: "accept with no prior offer".into(),
                })?;
                Outcome::Agreement { bid, round: *round }
            }
            _ => Outcome::Failure,
        };
        if replayed != self.outcome {
            return Err(Error::Parse {
                path: "<session log>".into(),
                detail: "logged outcome disagrees with turn sequence".into(),
            });
        }
        let recomputed = settle(&self.outcome, &self.config, &self.utilities[0], &self.utilities[1])?;
        let (a, b) = (recomputed.0 - self.settlement.0, recomputed.1 - self.settlement.1);
        if a.abs() > 1e-12 || b.abs() > 1e-12 {
            return Err(Error::Parse {
                path: "<session log>".into(),
                detail: format!(
                    "settlement mismatch: logged {:?}, recomputed {:?}",
                    self.settlement, recomputed
                ),
            });
        }
        Ok(recomputed)
    }
}
