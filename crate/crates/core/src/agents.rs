//! Negotiating agents: scripted/parametric baselines that know their own
//! true utility, and the adaptive agent that executes a concrete strategy
//! over estimated user and opponent models with an optional DRL threshold.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::domain::{Bid, Domain, LinearAdditiveUtility, SessionConfig};
use crate::drl::{compute_reward, featurize, DdpgModel, Experience, RewardEvent, STATE_DIM};
use crate::error::{Error, Result};
use crate::meta::nsga2::Nsga2Params;
use crate::opponent_model::{FrequencyModel, DEFAULT_WINDOW};
use crate::pareto::{approximate_front, ParetoFront};
use crate::protocol::{Action, AgentState, Negotiator, SessionEnd};
use crate::rng;
use crate::strategy::{
    concession_floor, time_dependent_target, BiddingInputs, ConcreteStrategy, OutcomeTable,
};

/// The scripted/parametric opponent roster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineKind {
    /// Concedes slowly early, fast near the deadline (e < 1).
    Boulware { exponent: f64 },
    /// Concedes fast early (e > 1).
    Conceder { exponent: f64 },
    /// Accepts above a fixed threshold and always bids its best.
    Hardliner { threshold: f64 },
    /// Uniform bids; accepts anything at or above the reservation.
    Random,
    /// Concedes on a time target while picking, among own-acceptable bids,
    /// the one its frequency model says the opponent likes most.
    FrequencyTeacher { window: usize },
}

impl BaselineKind {
    pub fn label(&self) -> String {
        match self {
            BaselineKind::Boulware { exponent } => format!("boulware({exponent})"),
            BaselineKind::Conceder { exponent } => format!("conceder({exponent})"),
            BaselineKind::Hardliner { threshold } => format!("hardliner({threshold})"),
            BaselineKind::Random => "random".into(),
            BaselineKind::FrequencyTeacher { window } => format!("teacher({window})"),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            BaselineKind::Boulware { exponent } | BaselineKind::Conceder { exponent } => {
                if *exponent <= 0.0 {
                    return Err(Error::Config("concession exponent must be positive".into()));
                }
            }
            BaselineKind::Hardliner { threshold } => {
                if !(0.0..=1.0).contains(threshold) {
                    return Err(Error::Config(format!("hardliner threshold {threshold} outside [0,1]")));
                }
            }
            BaselineKind::FrequencyTeacher { window } => {
                if *window == 0 {
                    return Err(Error::Config("teacher window must be positive".into()));
                }
            }
            BaselineKind::Random => {}
        }
        Ok(())
    }
}

/// Exponent of the teacher's own concession curve.
const TEACHER_EXPONENT: f64 = 0.5;

pub struct BaselineAgent {
    name: String,
    kind: BaselineKind,
    utility: LinearAdditiveUtility,
    outcomes: OutcomeTable,
    reservation: f64,
    model: Option<FrequencyModel>,
    /// (state features, emitted concession target) per turn, for building
    /// supervised pretraining datasets from teacher sessions.
    pub trace: Vec<([f64; STATE_DIM], f64)>,
    trace_enabled: bool,
    state: AgentState,
}

/// Builds a boxed baseline negotiator from its spec.
pub fn build_baseline(
    kind: &BaselineKind,
    utility: &LinearAdditiveUtility,
    domain: &Domain,
    config: &SessionConfig,
) -> Result<Box<dyn Negotiator>> {
    Ok(Box::new(BaselineAgent::new(kind, utility, domain, config)?))
}

impl BaselineAgent {
    pub fn new(
        kind: &BaselineKind,
        utility: &LinearAdditiveUtility,
        domain: &Domain,
        config: &SessionConfig,
    ) -> Result<Self> {
        kind.validate()?;
        let model = match kind {
            BaselineKind::FrequencyTeacher { window } => Some(FrequencyModel::new(domain, *window)?),
            _ => None,
        };
        Ok(BaselineAgent {
            name: kind.label(),
            kind: *kind,
            utility: utility.clone(),
            outcomes: OutcomeTable::build(utility, domain)?,
            reservation: config.reservation,
            model,
            trace: Vec::new(),
            trace_enabled: false,
            state: AgentState::initial(0, config, domain),
        })
    }

    /// Records (features, target) pairs while acting; teacher sessions
    /// logged this way become the supervised pretraining dataset.
    pub fn with_trace(mut self) -> Self {
        self.trace_enabled = true;
        self
    }

    fn target(&self, t: f64) -> f64 {
        let u_max = self.outcomes.max_utility();
        let u_min = concession_floor(self.reservation).min(u_max);
        match self.kind {
            BaselineKind::Boulware { exponent } | BaselineKind::Conceder { exponent } => {
                time_dependent_target(t, exponent, u_min, u_max)
            }
            BaselineKind::Hardliner { threshold } => threshold,
            BaselineKind::Random => self.reservation,
            BaselineKind::FrequencyTeacher { .. } => {
                time_dependent_target(t, TEACHER_EXPONENT, u_min, u_max)
            }
        }
    }
}

impl Negotiator for BaselineAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn act(&mut self, t: f64, pending: Option<&Bid>, rng: &mut rng::Rng) -> Action {
        if let Some(bid) = pending {
            let utility = self.utility.utility(bid).unwrap_or(0.0);
            self.state = self.state.updated(utility, t);
            if let Some(model) = &mut self.model {
                let _ = model.observe(bid);
                if model.history_len().is_multiple_of(model.window()) {
                    model.update_weights();
                }
            }
        } else {
            self.state = self.state.at_time(t);
        }
        let target = self.target(t);
        if self.trace_enabled {
            self.trace.push((featurize(&self.state), target.clamp(0.0, 1.0)));
        }
        if let Some(bid) = pending {
            let utility = self.utility.utility(bid).unwrap_or(0.0);
            let accept = match self.kind {
                BaselineKind::Hardliner { threshold } => utility >= threshold,
                _ => utility >= target,
            };
            if accept {
                return Action::Accept;
            }
        }
        let bid = match self.kind {
            BaselineKind::Hardliner { .. } => self.outcomes.best_bid().clone(),
            BaselineKind::Random => self.outcomes.nth(rng.gen_range(0..self.outcomes.len())).clone(),
            BaselineKind::FrequencyTeacher { .. } => {
                let model = self.model.as_ref().expect("teacher has a model");
                self.outcomes.argmax_above(target, |b| model.utility(b).unwrap_or(0.0)).clone()
            }
            _ => self.outcomes.nearest_above(target).clone(),
        };
        Action::Offer(bid)
    }
}

/// The adaptive agent: interprets a [`ConcreteStrategy`] against an
/// estimated user model, a frequency opponent model and, when the strategy
/// calls for it, a DDPG threshold and a per-turn near-Pareto front.
pub struct StrategyAgent {
    name: String,
    strategy: ConcreteStrategy,
    user_model: LinearAdditiveUtility,
    opponent_model: FrequencyModel,
    drl: Option<DdpgModel>,
    online_learning: bool,
    state: AgentState,
    outcomes: OutcomeTable,
    domain: Domain,
    agent_discount: f64,
    seed: u64,
    opp_history_utilities: Vec<f64>,
    opponent_last_bid: Option<Bid>,
    front_cache: Option<(u64, ParetoFront)>,
    front_recomputes: u64,
    pending_experience: Option<([f64; STATE_DIM], f64)>,
    train_calls: u64,
}

impl StrategyAgent {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &str,
        strategy: ConcreteStrategy,
        user_model: LinearAdditiveUtility,
        domain: &Domain,
        config: &SessionConfig,
        drl: Option<DdpgModel>,
        online_learning: bool,
        seed: u64,
    ) -> Result<Self> {
        if strategy.needs_drl() && drl.is_none() {
            return Err(Error::Config(
                "strategy uses the DRL threshold but no model was provided".into(),
            ));
        }
        let outcomes = OutcomeTable::build(&user_model, domain)?;
        Ok(StrategyAgent {
            name: name.to_string(),
            strategy,
            opponent_model: FrequencyModel::new(domain, DEFAULT_WINDOW)?,
            state: AgentState::initial(0, config, domain),
            user_model,
            drl,
            online_learning,
            outcomes,
            domain: domain.clone(),
            agent_discount: config.agent_discount,
            seed,
            opp_history_utilities: Vec::new(),
            opponent_last_bid: None,
            front_cache: None,
            front_recomputes: 0,
            pending_experience: None,
            train_calls: 0,
        })
    }

    /// Number of bids in the partial profile backing the user model; feeds
    /// the DRL state.
    pub fn with_profile_size(mut self, b_count: u32) -> Self {
        self.state.b_count = b_count;
        self
    }

    pub fn into_model(self) -> Option<DdpgModel> {
        self.drl
    }

    fn threshold(&mut self, rng: &mut rng::Rng) -> f64 {
        match &self.drl {
            Some(model) => {
                if self.online_learning {
                    model.exploring_threshold(&self.state, rng).unwrap_or(1.0)
                } else {
                    model.threshold(&self.state).unwrap_or(1.0)
                }
            }
            None => 1.0,
        }
    }

    /// The front is recomputed only when the opponent model's weights have
    /// changed since it was last built.
    fn front(&mut self) -> &ParetoFront {
        let version = self.opponent_model.weight_version();
        let stale = match &self.front_cache {
            Some((cached_version, _)) => *cached_version != version,
            None => true,
        };
        if stale {
            let params = Nsga2Params::per_turn(
                self.domain.outcome_count(),
                rng::derive(self.seed, 0x70_000 + self.front_recomputes),
            );
            self.front_recomputes += 1;
            let user = &self.user_model;
            let opponent = &self.opponent_model;
            let front = approximate_front(
                |bid: &Bid| {
                    (user.utility(bid).unwrap_or(0.0), opponent.utility(bid).unwrap_or(0.0))
                },
                &self.domain,
                &params,
            )
            .unwrap_or_else(|_| ParetoFront::new(vec![]).expect("empty front is valid"));
            self.front_cache = Some((version, front));
        }
        &self.front_cache.as_ref().expect("just filled").1
    }

    fn record_reward(&mut self, event: RewardEvent, t: f64, terminal: bool) {
        if !self.online_learning {
            return;
        }
        let Some((features, action)) = self.pending_experience.take() else {
            return;
        };
        let reward = compute_reward(event, t, self.agent_discount).unwrap_or(-1.0);
        let next = featurize(&self.state);
        if let Some(model) = &mut self.drl {
            let _ = model.remember(Experience {
                state: features.to_vec(),
                action,
                reward,
                next_state: next.to_vec(),
                terminal,
            });
            let step_seed = rng::derive(self.seed, 0xdd_000 + self.train_calls);
            self.train_calls += 1;
            model.train_step(step_seed);
        }
    }
}

impl Negotiator for StrategyAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn act(&mut self, t: f64, pending: Option<&Bid>, rng: &mut rng::Rng) -> Action {
        let pending_utility = pending.map(|bid| {
            let u = self.user_model.utility(bid).unwrap_or(0.0);
            let _ = self.opponent_model.observe(bid);
            if self.opponent_model.history_len().is_multiple_of(self.opponent_model.window()) {
                self.opponent_model.update_weights();
            }
            self.state = self.state.updated(u, t);
            self.opp_history_utilities.push(u);
            self.opponent_last_bid = Some(bid.clone());
            u
        });
        if pending_utility.is_none() {
            self.state = self.state.at_time(t);
        }
        if let Some(u) = pending_utility {
            self.record_reward(RewardEvent::ReceivedOffer { utility: u.clamp(0.0, 1.0) }, t, false);
        }

        let threshold = self.threshold(rng);
        // the front is only worth an NSGA-II run while a Pareto phase is live
        let front_needed = matches!(
            self.strategy.active_bidding_tactic(t),
            crate::strategy::BiddingTactic::ParetoSelect { .. }
        );
        if front_needed {
            self.front();
        }
        let front_ref = self.front_cache.as_ref().map(|(_, f)| f);
        let inputs = BiddingInputs {
            t,
            threshold,
            outcomes: &self.outcomes,
            front: front_ref,
            opponent_last_bid: self.opponent_last_bid.as_ref(),
            least_relevant_issue: self.user_model.least_weighted_issue(),
            domain: &self.domain,
            reservation: self.state.reservation,
        };
        let next = self.strategy.next_bid(&inputs, rng);
        let own_next_utility = self.user_model.utility(&next).unwrap_or(0.0);

        if self.online_learning {
            self.pending_experience = Some((featurize(&self.state), threshold));
        }

        if let Some(offer_utility) = pending_utility {
            if self.strategy.accept_decision(
                t,
                offer_utility,
                own_next_utility,
                &self.opp_history_utilities,
                threshold,
            ) {
                return Action::Accept;
            }
        }
        Action::Offer(next)
    }

    fn session_ended(&mut self, end: &SessionEnd) {
        if !self.online_learning {
            return;
        }
        let event = match &end.outcome {
            crate::protocol::Outcome::Agreement { bid, .. } => {
                let u = self.user_model.utility(bid).unwrap_or(0.0).clamp(0.0, 1.0);
                RewardEvent::Agreement { utility: u }
            }
            crate::protocol::Outcome::Failure => RewardEvent::Otherwise,
        };
        self.state = self.state.at_time(end.t);
        self.record_reward(event, end.t, true);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{run_session, Outcome, SessionSetup};
    use crate::testutil::{toy_domain, uniformish_utility};

    fn config(deadline: u32) -> SessionConfig {
        SessionConfig::new(deadline, 0.1, 1.0, 0.95).unwrap()
    }

    #[test]
    fn boulware_demands_maximum_at_start() {
        let domain = toy_domain(&[3, 3]);
        let u = uniformish_utility(&domain, 1);
        let cfg = config(100);
        let mut agent =
            BaselineAgent::new(&BaselineKind::Boulware { exponent: 0.2 }, &u, &domain, &cfg).unwrap();
        match agent.act(0.0, None, &mut rng::seeded(0)) {
            Action::Offer(bid) => {
                let max = domain
                    .enumerate()
                    .map(|b| u.utility(&b).unwrap())
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(u.utility(&bid).unwrap(), max);
            }
            Action::Accept => panic!("cannot accept without an offer"),
        }
    }

    #[test]
    fn boulware_target_is_non_increasing_and_conceder_concedes_faster() {
        let domain = toy_domain(&[4, 4]);
        let u = uniformish_utility(&domain, 2);
        let cfg = config(100);
        let boulware =
            BaselineAgent::new(&BaselineKind::Boulware { exponent: 0.2 }, &u, &domain, &cfg).unwrap();
        let conceder =
            BaselineAgent::new(&BaselineKind::Conceder { exponent: 2.0 }, &u, &domain, &cfg).unwrap();
        let mut last = f64::INFINITY;
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            let bt = boulware.target(t);
            assert!(bt <= last + 1e-12, "boulware target rose at t={t}");
            last = bt;
            if i > 0 && i < 20 {
                assert!(conceder.target(t) < bt, "conceder not faster at t={t}");
            }
        }
    }

    #[test]
    fn hardliners_never_agree() {
        let domain = toy_domain(&[3, 3]);
        let (ua, ub) = (uniformish_utility(&domain, 3), uniformish_utility(&domain, 4));
        let cfg = config(60);
        let setup = SessionSetup { domain: &domain, utility_a: &ua, utility_b: &ub, config: cfg };
        let mut a =
            BaselineAgent::new(&BaselineKind::Hardliner { threshold: 1.0 }, &ua, &domain, &cfg).unwrap();
        let mut b =
            BaselineAgent::new(&BaselineKind::Hardliner { threshold: 1.0 }, &ub, &domain, &cfg).unwrap();
        let log = run_session(&setup, &mut a, &mut b, 5).unwrap();
        assert_eq!(log.outcome, Outcome::Failure);
        assert_eq!(log.settlement, (0.1, 0.1));
    }

    #[test]
    fn baselines_emit_legal_actions_under_fuzz() {
        let domain = toy_domain(&[3, 2, 2]);
        let cfg = config(50);
        let kinds = [
            BaselineKind::Boulware { exponent: 0.2 },
            BaselineKind::Conceder { exponent: 2.0 },
            BaselineKind::Hardliner { threshold: 0.7 },
            BaselineKind::Random,
            BaselineKind::FrequencyTeacher { window: 5 },
        ];
        let mut sessions = 0;
        for (i, ka) in kinds.iter().enumerate() {
            for (j, kb) in kinds.iter().enumerate() {
                for rep in 0..8 {
                    let ua = uniformish_utility(&domain, 100 + rep);
                    let ub = uniformish_utility(&domain, 200 + rep);
                    let setup =
                        SessionSetup { domain: &domain, utility_a: &ua, utility_b: &ub, config: cfg };
                    let mut a = BaselineAgent::new(ka, &ua, &domain, &cfg).unwrap();
                    let mut b = BaselineAgent::new(kb, &ub, &domain, &cfg).unwrap();
                    let seed = (i * 31 + j) as u64 * 1000 + rep;
                    let log = run_session(&setup, &mut a, &mut b, seed).unwrap();
                    log.verify().unwrap();
                    sessions += 1;
                }
            }
        }
        assert_eq!(sessions, 200);
    }

    #[test]
    fn conceder_vs_boulware_agreement_round_is_stable() {
        let domain = toy_domain(&[3, 3]);
        let ua = uniformish_utility(&domain, 7);
        let ub = uniformish_utility(&domain, 8);
        let cfg = config(200);
        let setup = SessionSetup { domain: &domain, utility_a: &ua, utility_b: &ub, config: cfg };
        let run = |seed| {
            let mut a =
                BaselineAgent::new(&BaselineKind::Conceder { exponent: 2.0 }, &ua, &domain, &cfg)
                    .unwrap();
            let mut b =
                BaselineAgent::new(&BaselineKind::Boulware { exponent: 0.2 }, &ub, &domain, &cfg)
                    .unwrap();
            run_session(&setup, &mut a, &mut b, seed).unwrap()
        };
        let log = run(3);
        // regression fixture from the first recorded run
        match &log.outcome {
            Outcome::Agreement { round, .. } => assert_eq!(*round, log.turns.len() as u32),
            Outcome::Failure => panic!("conceder vs boulware should agree"),
        }
        assert_eq!(log.to_jsonl(), run(3).to_jsonl());
    }

    #[test]
    fn strategy_agent_requires_model_when_strategy_references_it() {
        let domain = toy_domain(&[3, 3]);
        let u = uniformish_utility(&domain, 9);
        let cfg = config(50);
        let err = StrategyAgent::new(
            "adaptive",
            ConcreteStrategy::example(),
            u,
            &domain,
            &cfg,
            None,
            false,
            1,
        );
        assert!(err.is_err());
    }

    #[test]
    fn strategy_agent_plays_complete_sessions() {
        let domain = toy_domain(&[3, 3, 2]);
        let (ua, ub) = (uniformish_utility(&domain, 10), uniformish_utility(&domain, 11));
        let cfg = config(80);
        let setup = SessionSetup { domain: &domain, utility_a: &ua, utility_b: &ub, config: cfg };
        let drl = DdpgModel::new(crate::drl::DdpgConfig { hidden: [8, 8], capacity: 64, batch: 8, ..Default::default() }, 3).unwrap();
        let mut adaptive = StrategyAgent::new(
            "adaptive",
            ConcreteStrategy::example(),
            ua.clone(),
            &domain,
            &cfg,
            Some(drl),
            false,
            7,
        )
        .unwrap();
        let mut opponent =
            BaselineAgent::new(&BaselineKind::Conceder { exponent: 2.0 }, &ub, &domain, &cfg).unwrap();
        let log = run_session(&setup, &mut adaptive, &mut opponent, 11).unwrap();
        log.verify().unwrap();
    }

    #[test]
    fn online_learning_fills_the_replay_buffer() {
        let domain = toy_domain(&[3, 3]);
        let (ua, ub) = (uniformish_utility(&domain, 12), uniformish_utility(&domain, 13));
        let cfg = config(60);
        let setup = SessionSetup { domain: &domain, utility_a: &ua, utility_b: &ub, config: cfg };
        let drl = DdpgModel::new(
            crate::drl::DdpgConfig { hidden: [8, 8], capacity: 128, batch: 8, ..Default::default() },
            4,
        )
        .unwrap();
        let mut adaptive = StrategyAgent::new(
            "adaptive",
            ConcreteStrategy::example(),
            ua.clone(),
            &domain,
            &cfg,
            Some(drl),
            true,
            8,
        )
        .unwrap();
        let mut opponent =
            BaselineAgent::new(&BaselineKind::Boulware { exponent: 0.2 }, &ub, &domain, &cfg).unwrap();
        let log = run_session(&setup, &mut adaptive, &mut opponent, 12).unwrap();
        let model = adaptive.into_model().unwrap();
        assert!(model.replay_len() > 0, "no experiences recorded ({:?})", log.outcome);
        assert!(model.all_finite());
    }

    #[test]
    fn teacher_trace_collects_monotone_targets() {
        let domain = toy_domain(&[3, 3]);
        let (ua, ub) = (uniformish_utility(&domain, 14), uniformish_utility(&domain, 15));
        let cfg = config(40);
        let setup = SessionSetup { domain: &domain, utility_a: &ua, utility_b: &ub, config: cfg };
        let mut teacher =
            BaselineAgent::new(&BaselineKind::FrequencyTeacher { window: 5 }, &ua, &domain, &cfg)
                .unwrap()
                .with_trace();
        let mut opponent =
            BaselineAgent::new(&BaselineKind::Hardliner { threshold: 1.0 }, &ub, &domain, &cfg)
                .unwrap();
        let _ = run_session(&setup, &mut teacher, &mut opponent, 13).unwrap();
        assert!(!teacher.trace.is_empty());
        for pair in teacher.trace.windows(2) {
            assert!(pair[1].1 <= pair[0].1 + 1e-12, "teacher target rose");
        }
    }
}
