//! Phase-structured negotiation strategies.
//!
//! An acceptance strategy splits normalized time into phases and conjoins a
//! set of threshold tactics per phase: an offer is accepted only when its
//! estimated utility clears every enabled tactic. A bidding strategy runs
//! exactly one bid-producing tactic per phase. Templates leave the phase
//! durations, tactic choices and tactic parameters as genes that firefly
//! search instantiates against a training matrix of seeded sessions.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::agents::{build_baseline, BaselineKind};
use crate::domain::{Bid, Domain, LinearAdditiveUtility, SessionConfig};
use crate::drl::DdpgModel;
use crate::error::{Error, Result};
use crate::meta::firefly::{firefly_optimize_with_inits, FaParams};
use crate::pareto::{select_bid, ParetoFront, ENUMERATION_CAP};
use crate::protocol::{run_session, SessionSetup};
use crate::rng;

/// Shortest allowed phase, keeping every phase alive during learning.
pub const MIN_PHASE: f64 = 0.05;

/// Threshold tactics; an offer must clear every enabled one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tactic", rename_all = "snake_case")]
pub enum AcceptanceTactic {
    /// Accept only offers at least as good as the bid we are about to make.
    NextOwnBidUtility,
    /// Accept offers above the (a·t + b)-quantile of opponent-bid utilities.
    Quantile { slope: f64, intercept: f64 },
    /// Accept offers above the DRL threshold ū_t.
    DrlThreshold,
    /// Accept offers above a fixed learned threshold.
    FixedThreshold { threshold: f64 },
}

/// Bid-producing tactics; exactly one runs per phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tactic", rename_all = "snake_case")]
pub enum BiddingTactic {
    /// Concede along a time-dependent target curve, slowly at first.
    Boulware { exponent: f64 },
    /// Pick from the near-Pareto front, weighting own utility by
    /// clamp(a·t + b).
    ParetoSelect { slope: f64, intercept: f64 },
    /// Re-draw the least relevant issue of the opponent's last bid.
    OpponentGreedy,
    /// Uniform bid above the DRL threshold.
    RandomAbove,
}

/// u(t) = u_max − (u_max − u_min)·t^(1/e): boulware-shaped for e < 1,
/// conceder-shaped for e > 1.
pub fn time_dependent_target(t: f64, exponent: f64, u_min: f64, u_max: f64) -> f64 {
    u_max - (u_max - u_min) * t.powf(1.0 / exponent)
}

/// Conventional concession floor used by the time-dependent tactics.
pub fn concession_floor(reservation: f64) -> f64 {
    reservation.max(0.3)
}

/// Type-1 (inverse-CDF) quantile of `values`; p is clamped into \[0,1\].
/// Returns 1.0 for an empty history, so quantile gates stay closed until
/// the opponent has bid.
pub fn history_quantile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return 1.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite utilities"));
    let p = p.clamp(0.0, 1.0);
    let idx = ((p * sorted.len() as f64).ceil() as usize).max(1) - 1;
    sorted[idx.min(sorted.len() - 1)]
}

/// All outcomes scored by one utility model, ascending; ties ordered by bid.
/// Built once per session so tactics can binary-search targets.
#[derive(Debug, Clone)]
pub struct OutcomeTable {
    entries: Vec<(f64, Bid)>,
}

impl OutcomeTable {
    pub fn build(utility: &LinearAdditiveUtility, domain: &Domain) -> Result<Self> {
        let count = domain.outcome_count();
        if count > ENUMERATION_CAP {
            return Err(Error::Budget { size: count, cap: ENUMERATION_CAP });
        }
        let mut entries: Vec<(f64, Bid)> = domain
            .enumerate()
            .map(|bid| {
                let u = utility.utility(&bid)?;
                Ok((u, bid))
            })
            .collect::<Result<_>>()?;
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite").then_with(|| a.1.cmp(&b.1)));
        Ok(OutcomeTable { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_utility(&self) -> f64 {
        self.entries.last().expect("nonempty domain").0
    }

    /// Bid at position `idx` of the ascending-utility order.
    pub fn nth(&self, idx: usize) -> &Bid {
        &self.entries[idx].1
    }

    pub fn best_bid(&self) -> &Bid {
        &self.entries.last().expect("nonempty domain").1
    }

    fn cut_at_or_above(&self, target: f64) -> usize {
        self.entries.partition_point(|(u, _)| *u < target)
    }

    /// Cheapest bid whose utility reaches `target`; the best bid when none
    /// does.
    pub fn nearest_above(&self, target: f64) -> &Bid {
        let cut = self.cut_at_or_above(target);
        if cut == self.entries.len() {
            self.best_bid()
        } else {
            &self.entries[cut].1
        }
    }

    /// Uniform bid with utility ≥ `threshold`; the best bid when the set is
    /// empty.
    pub fn random_at_or_above(&self, threshold: f64, rng: &mut rng::Rng) -> &Bid {
        let cut = self.cut_at_or_above(threshold);
        if cut == self.entries.len() {
            self.best_bid()
        } else {
            &self.entries[rng.gen_range(cut..self.entries.len())].1
        }
    }

    /// Bid maximizing `score` among those with utility ≥ `target`; falls
    /// back to the best own bid when the set is empty.
    pub fn argmax_above<F: FnMut(&Bid) -> f64>(&self, target: f64, mut score: F) -> &Bid {
        let cut = self.cut_at_or_above(target);
        if cut == self.entries.len() {
            return self.best_bid();
        }
        let mut best = cut;
        let mut best_score = f64::NEG_INFINITY;
        for (i, (_, bid)) in self.entries.iter().enumerate().skip(cut) {
            let s = score(bid);
            if s > best_score {
                best = i;
                best_score = s;
            }
        }
        &self.entries[best].1
    }
}

/// A fully instantiated strategy: resolved phase boundaries, a tactic
/// conjunction per acceptance phase and one tactic per bidding phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcreteStrategy {
    acceptance_bounds: Vec<f64>,
    acceptance_phases: Vec<Vec<AcceptanceTactic>>,
    bidding_bounds: Vec<f64>,
    bidding_phases: Vec<BiddingTactic>,
}

fn check_bounds(bounds: &[f64], phases: usize, which: &str) -> Result<()> {
    if bounds.len() != phases + 1 {
        return Err(Error::Config(format!(
            "{which}: {} bounds for {} phases",
            bounds.len(),
            phases
        )));
    }
    if bounds[0] != 0.0 || *bounds.last().expect("nonempty") != 1.0 {
        return Err(Error::Config(format!("{which}: bounds must span [0,1]")));
    }
    if bounds.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("{which}: bounds must strictly increase")));
    }
    Ok(())
}

fn phase_index(bounds: &[f64], t: f64) -> usize {
    let phases = bounds.len() - 1;
    for i in 0..phases {
        if t >= bounds[i] && t < bounds[i + 1] {
            return i;
        }
    }
    // t = 1 (or beyond) closes into the final phase
    phases - 1
}

/// Everything a bidding tactic may consult.
pub struct BiddingInputs<'a> {
    pub t: f64,
    /// ū_t.
    pub threshold: f64,
    pub outcomes: &'a OutcomeTable,
    pub front: Option<&'a ParetoFront>,
    pub opponent_last_bid: Option<&'a Bid>,
    /// Least-weighted issue of the estimated user model.
    pub least_relevant_issue: usize,
    pub domain: &'a Domain,
    pub reservation: f64,
}

impl ConcreteStrategy {
    pub fn new(
        acceptance_bounds: Vec<f64>,
        acceptance_phases: Vec<Vec<AcceptanceTactic>>,
        bidding_bounds: Vec<f64>,
        bidding_phases: Vec<BiddingTactic>,
    ) -> Result<Self> {
        check_bounds(&acceptance_bounds, acceptance_phases.len(), "acceptance")?;
        check_bounds(&bidding_bounds, bidding_phases.len(), "bidding")?;
        if acceptance_phases.iter().any(|p| p.is_empty()) {
            return Err(Error::Config("every acceptance phase needs a tactic".into()));
        }
        for phase in &acceptance_phases {
            for tactic in phase {
                if let AcceptanceTactic::FixedThreshold { threshold } = tactic {
                    if !(0.0..=1.0).contains(threshold) {
                        return Err(Error::Config(format!(
                            "fixed threshold {threshold} outside [0,1]"
                        )));
                    }
                }
            }
        }
        for tactic in &bidding_phases {
            if let BiddingTactic::Boulware { exponent } = tactic {
                if !(*exponent > 0.0 && *exponent <= 1.0) {
                    return Err(Error::Config(format!("boulware exponent {exponent} outside (0,1]")));
                }
            }
        }
        Ok(ConcreteStrategy { acceptance_bounds, acceptance_phases, bidding_bounds, bidding_phases })
    }

    /// The worked-example strategy shape: quantile acceptance mid-session
    /// bracketed by threshold phases, boulware opening into Pareto selection
    /// and opponent-oriented closing bids.
    pub fn example() -> Self {
        ConcreteStrategy::new(
            vec![0.0, 0.4, 0.7, 0.95, 1.0],
            vec![
                vec![AcceptanceTactic::DrlThreshold, AcceptanceTactic::FixedThreshold { threshold: 0.7 }],
                vec![
                    AcceptanceTactic::NextOwnBidUtility,
                    AcceptanceTactic::Quantile { slope: -0.67, intercept: 1.27 },
                ],
                vec![
                    AcceptanceTactic::NextOwnBidUtility,
                    AcceptanceTactic::Quantile { slope: -0.21, intercept: 0.9 },
                ],
                vec![AcceptanceTactic::DrlThreshold],
            ],
            vec![0.0, 0.4, 0.9, 1.0],
            vec![
                BiddingTactic::Boulware { exponent: 0.2 },
                BiddingTactic::ParetoSelect { slope: -0.75, intercept: 0.6 },
                BiddingTactic::OpponentGreedy,
            ],
        )
        .expect("example strategy is valid")
    }

    pub fn acceptance_bounds(&self) -> &[f64] {
        &self.acceptance_bounds
    }

    pub fn acceptance_phases(&self) -> &[Vec<AcceptanceTactic>] {
        &self.acceptance_phases
    }

    pub fn bidding_bounds(&self) -> &[f64] {
        &self.bidding_bounds
    }

    pub fn bidding_phases(&self) -> &[BiddingTactic] {
        &self.bidding_phases
    }

    /// True when any phase consults the DRL threshold.
    pub fn needs_drl(&self) -> bool {
        self.acceptance_phases
            .iter()
            .any(|phase| phase.iter().any(|t| matches!(t, AcceptanceTactic::DrlThreshold)))
            || self.bidding_phases.iter().any(|t| matches!(t, BiddingTactic::RandomAbove))
    }

    /// True when any bidding phase draws from the Pareto front.
    pub fn needs_front(&self) -> bool {
        self.bidding_phases.iter().any(|t| matches!(t, BiddingTactic::ParetoSelect { .. }))
    }

    /// Conjunction over the phase's enabled tactics: accept iff the offer's
    /// estimated utility clears every threshold. t = 1 falls into the last
    /// phase.
    pub fn accept_decision(
        &self,
        t: f64,
        offer_utility: f64,
        own_next_bid_utility: f64,
        opponent_history: &[f64],
        drl_threshold: f64,
    ) -> bool {
        let phase = &self.acceptance_phases[phase_index(&self.acceptance_bounds, t)];
        let mut gate = f64::NEG_INFINITY;
        for tactic in phase {
            let threshold = match tactic {
                AcceptanceTactic::NextOwnBidUtility => own_next_bid_utility,
                AcceptanceTactic::Quantile { slope, intercept } => {
                    history_quantile(opponent_history, slope * t + intercept)
                }
                AcceptanceTactic::DrlThreshold => drl_threshold,
                AcceptanceTactic::FixedThreshold { threshold } => *threshold,
            };
            gate = gate.max(threshold);
        }
        offer_utility >= gate
    }

    /// The bidding tactic governing time `t`.
    pub fn active_bidding_tactic(&self, t: f64) -> &BiddingTactic {
        &self.bidding_phases[phase_index(&self.bidding_bounds, t)]
    }

    /// Runs the phase's bidding tactic. Every branch lands on a bid in Ω:
    /// tactics with unmet preconditions fall back to the best own bid.
    pub fn next_bid(&self, inputs: &BiddingInputs, rng: &mut rng::Rng) -> Bid {
        let tactic = self.active_bidding_tactic(inputs.t);
        match tactic {
            BiddingTactic::Boulware { exponent } => {
                let target = time_dependent_target(
                    inputs.t,
                    *exponent,
                    concession_floor(inputs.reservation).min(inputs.outcomes.max_utility()),
                    inputs.outcomes.max_utility(),
                );
                inputs.outcomes.nearest_above(target).clone()
            }
            BiddingTactic::ParetoSelect { slope, intercept } => {
                let weight = (slope * inputs.t + intercept).clamp(0.0, 1.0);
                match inputs.front {
                    Some(front) if !front.is_empty() => {
                        select_bid(front, weight).expect("nonempty front").clone()
                    }
                    _ => inputs.outcomes.best_bid().clone(),
                }
            }
            BiddingTactic::OpponentGreedy => match inputs.opponent_last_bid {
                Some(bid) => {
                    let mut altered = bid.clone();
                    let issue = inputs.least_relevant_issue;
                    let k = inputs.domain.issues[issue].values.len();
                    altered.choices[issue] = rng.gen_range(0..k);
                    altered
                }
                None => inputs.outcomes.best_bid().clone(),
            },
            BiddingTactic::RandomAbove => {
                inputs.outcomes.random_at_or_above(inputs.threshold, rng).clone()
            }
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::domain::write_json(path.as_ref(), self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let raw: ConcreteStrategy = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        ConcreteStrategy::new(
            raw.acceptance_bounds,
            raw.acceptance_phases,
            raw.bidding_bounds,
            raw.bidding_phases,
        )
        .map_err(|e| Error::Parse { path: path.display().to_string(), detail: e.to_string() })
    }
}

fn write_bound(out: &mut String, lo: f64, hi: f64, closed: bool) {
    if closed {
        let _ = write!(out, "t in [{lo}, {hi}]");
    } else {
        let _ = write!(out, "t in [{lo}, {hi})");
    }
}

fn render_acceptance_tactic(out: &mut String, tactic: &AcceptanceTactic) {
    match tactic {
        AcceptanceTactic::NextOwnBidUtility => out.push_str("NextOwnBidUtility"),
        AcceptanceTactic::Quantile { slope, intercept } => {
            let _ = write!(out, "Quantile({slope}, {intercept})");
        }
        AcceptanceTactic::DrlThreshold => out.push_str("DrlThreshold"),
        AcceptanceTactic::FixedThreshold { threshold } => {
            let _ = write!(out, "FixedThreshold({threshold})");
        }
    }
}

fn render_bidding_tactic(out: &mut String, tactic: &BiddingTactic) {
    match tactic {
        BiddingTactic::Boulware { exponent } => {
            let _ = write!(out, "Boulware({exponent})");
        }
        BiddingTactic::ParetoSelect { slope, intercept } => {
            let _ = write!(out, "ParetoSelect({slope}, {intercept})");
        }
        BiddingTactic::OpponentGreedy => out.push_str("OpponentGreedy"),
        BiddingTactic::RandomAbove => out.push_str("RandomAbove"),
    }
}

/// Human-readable phase listing; floats print in shortest round-trip form,
/// so [`parse_strategy`] recovers the strategy exactly.
pub fn render_strategy(strategy: &ConcreteStrategy) -> String {
    let mut out = String::new();
    let ab = &strategy.acceptance_bounds;
    for (i, phase) in strategy.acceptance_phases.iter().enumerate() {
        assert!(!phase.is_empty(), "acceptance phase without tactics");
        out.push_str("accept ");
        write_bound(&mut out, ab[i], ab[i + 1], i + 1 == strategy.acceptance_phases.len());
        out.push_str(": ");
        for (j, tactic) in phase.iter().enumerate() {
            if j > 0 {
                out.push_str(" & ");
            }
            render_acceptance_tactic(&mut out, tactic);
        }
        out.push('\n');
    }
    let bb = &strategy.bidding_bounds;
    for (i, tactic) in strategy.bidding_phases.iter().enumerate() {
        out.push_str("bid ");
        write_bound(&mut out, bb[i], bb[i + 1], i + 1 == strategy.bidding_phases.len());
        out.push_str(": ");
        render_bidding_tactic(&mut out, tactic);
        out.push('\n');
    }
    out
}

fn parse_err(line: &str, detail: &str) -> Error {
    Error::Parse { path: "<strategy text>".into(), detail: format!("{detail} in {line:?}") }
}

fn parse_interval(text: &str, line: &str) -> Result<(f64, f64)> {
    let body = text
        .strip_prefix("t in [")
        .ok_or_else(|| parse_err(line, "expected 't in ['"))?
        .trim_end_matches([')', ']']);
    let (lo, hi) = body.split_once(',').ok_or_else(|| parse_err(line, "expected two bounds"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| parse_err(line, "bad lower bound"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| parse_err(line, "bad upper bound"))?;
    Ok((lo, hi))
}

fn parse_args(text: &str, line: &str) -> Result<Vec<f64>> {
    let inner = text
        .trim()
        .trim_start_matches('(')
        .trim_end_matches(')');
    inner
        .split(',')
        .map(|a| a.trim().parse::<f64>().map_err(|_| parse_err(line, "bad numeric argument")))
        .collect()
}

fn parse_acceptance_tactic(text: &str, line: &str) -> Result<AcceptanceTactic> {
    let text = text.trim();
    if text == "NextOwnBidUtility" {
        return Ok(AcceptanceTactic::NextOwnBidUtility);
    }
    if text == "DrlThreshold" {
        return Ok(AcceptanceTactic::DrlThreshold);
    }
    if let Some(rest) = text.strip_prefix("Quantile") {
        let args = parse_args(rest, line)?;
        if args.len() != 2 {
            return Err(parse_err(line, "Quantile takes two arguments"));
        }
        return Ok(AcceptanceTactic::Quantile { slope: args[0], intercept: args[1] });
    }
    if let Some(rest) = text.strip_prefix("FixedThreshold") {
        let args = parse_args(rest, line)?;
        if args.len() != 1 {
            return Err(parse_err(line, "FixedThreshold takes one argument"));
        }
        return Ok(AcceptanceTactic::FixedThreshold { threshold: args[0] });
    }
    Err(parse_err(line, "unknown acceptance tactic"))
}

fn parse_bidding_tactic(text: &str, line: &str) -> Result<BiddingTactic> {
    let text = text.trim();
    if text == "OpponentGreedy" {
        return Ok(BiddingTactic::OpponentGreedy);
    }
    if text == "RandomAbove" {
        return Ok(BiddingTactic::RandomAbove);
    }
    if let Some(rest) = text.strip_prefix("Boulware") {
        let args = parse_args(rest, line)?;
        if args.len() != 1 {
            return Err(parse_err(line, "Boulware takes one argument"));
        }
        return Ok(BiddingTactic::Boulware { exponent: args[0] });
    }
    if let Some(rest) = text.strip_prefix("ParetoSelect") {
        let args = parse_args(rest, line)?;
        if args.len() != 2 {
            return Err(parse_err(line, "ParetoSelect takes two arguments"));
        }
        return Ok(BiddingTactic::ParetoSelect { slope: args[0], intercept: args[1] });
    }
    Err(parse_err(line, "unknown bidding tactic"))
}

/// Inverse of [`render_strategy`].
pub fn parse_strategy(text: &str) -> Result<ConcreteStrategy> {
    let mut acceptance_bounds: Vec<f64> = Vec::new();
    let mut acceptance_phases: Vec<Vec<AcceptanceTactic>> = Vec::new();
    let mut bidding_bounds: Vec<f64> = Vec::new();
    let mut bidding_phases: Vec<BiddingTactic> = Vec::new();

    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let (kind, rest) = line
            .split_once(' ')
            .ok_or_else(|| parse_err(line, "expected 'accept' or 'bid' prefix"))?;
        let (interval, tactics) =
            rest.split_once(':').ok_or_else(|| parse_err(line, "expected ':'"))?;
        let (lo, hi) = parse_interval(interval.trim(), line)?;
        match kind {
            "accept" => {
                if acceptance_bounds.is_empty() {
                    acceptance_bounds.push(lo);
                } else if *acceptance_bounds.last().expect("nonempty") != lo {
                    return Err(parse_err(line, "acceptance phases must be contiguous"));
                }
                acceptance_bounds.push(hi);
                acceptance_phases.push(
                    tactics
                        .split('&')
                        .map(|t| parse_acceptance_tactic(t, line))
                        .collect::<Result<_>>()?,
                );
            }
            "bid" => {
                if bidding_bounds.is_empty() {
                    bidding_bounds.push(lo);
                } else if *bidding_bounds.last().expect("nonempty") != lo {
                    return Err(parse_err(line, "bidding phases must be contiguous"));
                }
                bidding_bounds.push(hi);
                bidding_phases.push(parse_bidding_tactic(tactics, line)?);
            }
            other => return Err(parse_err(line, &format!("unknown line kind {other:?}"))),
        }
    }
    ConcreteStrategy::new(acceptance_bounds, acceptance_phases, bidding_bounds, bidding_phases)
}

/// Candidate tactic kinds a template may offer per phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptanceTacticKind {
    NextOwnBidUtility,
    Quantile,
    DrlThreshold,
    FixedThreshold,
}

impl AcceptanceTacticKind {
    fn param_genes(self) -> usize {
        match self {
            AcceptanceTacticKind::Quantile => 2,
            AcceptanceTacticKind::FixedThreshold => 1,
            _ => 0,
        }
    }

    fn matches(self, tactic: &AcceptanceTactic) -> bool {
        matches!(
            (self, tactic),
            (AcceptanceTacticKind::NextOwnBidUtility, AcceptanceTactic::NextOwnBidUtility)
                | (AcceptanceTacticKind::Quantile, AcceptanceTactic::Quantile { .. })
                | (AcceptanceTacticKind::DrlThreshold, AcceptanceTactic::DrlThreshold)
                | (AcceptanceTacticKind::FixedThreshold, AcceptanceTactic::FixedThreshold { .. })
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiddingTacticKind {
    Boulware,
    ParetoSelect,
    OpponentGreedy,
    RandomAbove,
}

impl BiddingTacticKind {
    fn param_genes(self) -> usize {
        match self {
            BiddingTacticKind::Boulware => 1,
            BiddingTacticKind::ParetoSelect => 2,
            _ => 0,
        }
    }

    fn matches(self, tactic: &BiddingTactic) -> bool {
        matches!(
            (self, tactic),
            (BiddingTacticKind::Boulware, BiddingTactic::Boulware { .. })
                | (BiddingTacticKind::ParetoSelect, BiddingTactic::ParetoSelect { .. })
                | (BiddingTacticKind::OpponentGreedy, BiddingTactic::OpponentGreedy)
                | (BiddingTacticKind::RandomAbove, BiddingTactic::RandomAbove)
        )
    }
}

// gene boxes
const QUANTILE_SLOPE: (f64, f64) = (-2.0, 0.5);
const QUANTILE_INTERCEPT: (f64, f64) = (0.5, 1.5);
const BOULWARE_EXPONENT: (f64, f64) = (0.02, 1.0);
const PARETO_SLOPE: (f64, f64) = (-2.0, 0.5);
const PARETO_INTERCEPT: (f64, f64) = (0.0, 1.2);

fn box_scale(gene: f64, (lo, hi): (f64, f64)) -> f64 {
    lo + gene.clamp(0.0, 1.0) * (hi - lo)
}

fn box_unscale(value: f64, (lo, hi): (f64, f64)) -> f64 {
    ((value - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// A schema of learnable strategies: phase counts and per-phase candidate
/// tactic sets. Durations, choices and tactic parameters are genes in
/// \[0,1\]^n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyTemplate {
    pub acceptance: Vec<Vec<AcceptanceTacticKind>>,
    pub bidding: Vec<Vec<BiddingTacticKind>>,
}

impl StrategyTemplate {
    /// Four phases a side, each offering the full tactic library.
    pub fn standard() -> Self {
        StrategyTemplate {
            acceptance: vec![
                vec![
                    AcceptanceTacticKind::NextOwnBidUtility,
                    AcceptanceTacticKind::Quantile,
                    AcceptanceTacticKind::DrlThreshold,
                    AcceptanceTacticKind::FixedThreshold,
                ];
                4
            ],
            bidding: vec![
                vec![
                    BiddingTacticKind::Boulware,
                    BiddingTacticKind::ParetoSelect,
                    BiddingTacticKind::OpponentGreedy,
                    BiddingTacticKind::RandomAbove,
                ];
                4
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.acceptance.is_empty() || self.bidding.is_empty() {
            return Err(Error::Config("template needs at least one phase per side".into()));
        }
        if self.acceptance.iter().any(|c| c.is_empty()) || self.bidding.iter().any(|c| c.is_empty()) {
            return Err(Error::Config("every phase needs at least one candidate tactic".into()));
        }
        Ok(())
    }

    pub fn gene_count(&self) -> usize {
        let acc: usize = self
            .acceptance
            .iter()
            .map(|c| c.iter().map(|k| 1 + k.param_genes()).sum::<usize>())
            .sum();
        let bid: usize = self
            .bidding
            .iter()
            .map(|c| c.iter().map(|k| 1 + k.param_genes()).sum::<usize>())
            .sum();
        self.acceptance.len() + acc + self.bidding.len() + bid
    }

    /// Decodes a gene vector. Total on \[0,1\]^n: durations softmax into a
    /// partition with a 0.05 floor, choice genes ≥ 0.5 enable acceptance
    /// tactics (argmax as fallback), the bidding argmax wins, parameters
    /// box-scale.
    pub fn decode(&self, genes: &[f64]) -> Result<ConcreteStrategy> {
        if genes.len() != self.gene_count() {
            return Err(Error::Config(format!(
                "expected {} genes, got {}",
                self.gene_count(),
                genes.len()
            )));
        }
        let mut cursor = 0;
        let take = |cursor: &mut usize, n: usize| {
            let slice = &genes[*cursor..*cursor + n];
            *cursor += n;
            slice
        };

        let acc_bounds = durations_to_bounds(take(&mut cursor, self.acceptance.len()));
        let mut acceptance_phases = Vec::with_capacity(self.acceptance.len());
        for candidates in &self.acceptance {
            let mut choice_scores = Vec::with_capacity(candidates.len());
            let mut decoded = Vec::with_capacity(candidates.len());
            for kind in candidates {
                let choice = take(&mut cursor, 1)[0];
                let tactic = match kind {
                    AcceptanceTacticKind::NextOwnBidUtility => AcceptanceTactic::NextOwnBidUtility,
                    AcceptanceTacticKind::DrlThreshold => AcceptanceTactic::DrlThreshold,
                    AcceptanceTacticKind::Quantile => {
                        let p = take(&mut cursor, 2);
                        AcceptanceTactic::Quantile {
                            slope: box_scale(p[0], QUANTILE_SLOPE),
                            intercept: box_scale(p[1], QUANTILE_INTERCEPT),
                        }
                    }
                    AcceptanceTacticKind::FixedThreshold => {
                        let p = take(&mut cursor, 1);
                        AcceptanceTactic::FixedThreshold { threshold: p[0].clamp(0.0, 1.0) }
                    }
                };
                choice_scores.push(choice);
                decoded.push(tactic);
            }
            let mut enabled: Vec<AcceptanceTactic> = decoded
                .iter()
                .zip(&choice_scores)
                .filter(|(_, &c)| c >= 0.5)
                .map(|(t, _)| *t)
                .collect();
            if enabled.is_empty() {
                let best = argmax(&choice_scores);
                enabled.push(decoded[best]);
            }
            acceptance_phases.push(enabled);
        }

        let bid_bounds = durations_to_bounds(take(&mut cursor, self.bidding.len()));
        let mut bidding_phases = Vec::with_capacity(self.bidding.len());
        for candidates in &self.bidding {
            let mut choice_scores = Vec::with_capacity(candidates.len());
            let mut decoded = Vec::with_capacity(candidates.len());
            for kind in candidates {
                let choice = take(&mut cursor, 1)[0];
                let tactic = match kind {
                    BiddingTacticKind::OpponentGreedy => BiddingTactic::OpponentGreedy,
                    BiddingTacticKind::RandomAbove => BiddingTactic::RandomAbove,
                    BiddingTacticKind::Boulware => {
                        let p = take(&mut cursor, 1);
                        BiddingTactic::Boulware { exponent: box_scale(p[0], BOULWARE_EXPONENT) }
                    }
                    BiddingTacticKind::ParetoSelect => {
                        let p = take(&mut cursor, 2);
                        BiddingTactic::ParetoSelect {
                            slope: box_scale(p[0], PARETO_SLOPE),
                            intercept: box_scale(p[1], PARETO_INTERCEPT),
                        }
                    }
                };
                choice_scores.push(choice);
                decoded.push(tactic);
            }
            bidding_phases.push(decoded[argmax(&choice_scores)]);
        }
        debug_assert_eq!(cursor, genes.len());
        ConcreteStrategy::new(acc_bounds, acceptance_phases, bid_bounds, bidding_phases)
    }

    /// Neutral genes: equal phases, everything enabled, mid-box parameters.
    pub fn neutral_genes(&self) -> Vec<f64> {
        let mut genes = vec![0.5; self.acceptance.len()];
        for candidates in &self.acceptance {
            for kind in candidates {
                genes.push(0.75);
                genes.extend(std::iter::repeat_n(0.5, kind.param_genes()));
            }
        }
        genes.extend(std::iter::repeat_n(0.5, self.bidding.len()));
        for candidates in &self.bidding {
            for kind in candidates {
                genes.push(0.5);
                genes.extend(std::iter::repeat_n(0.5, kind.param_genes()));
            }
        }
        genes
    }

    /// Best-effort gene vector reproducing `strategy` within this template;
    /// `None` when the shapes or tactic kinds do not line up. Durations are
    /// inverted exactly when above the phase floor.
    pub fn encode(&self, strategy: &ConcreteStrategy) -> Option<Vec<f64>> {
        if strategy.acceptance_phases.len() != self.acceptance.len()
            || strategy.bidding_phases.len() != self.bidding.len()
        {
            return None;
        }
        let mut genes = bounds_to_duration_genes(&strategy.acceptance_bounds)?;
        for (candidates, phase) in self.acceptance.iter().zip(&strategy.acceptance_phases) {
            if phase.iter().any(|t| !candidates.iter().any(|k| k.matches(t))) {
                return None;
            }
            for kind in candidates {
                let hit = phase.iter().find(|t| kind.matches(t));
                genes.push(if hit.is_some() { 0.9 } else { 0.1 });
                match (kind, hit) {
                    (AcceptanceTacticKind::Quantile, Some(AcceptanceTactic::Quantile { slope, intercept })) => {
                        genes.push(box_unscale(*slope, QUANTILE_SLOPE));
                        genes.push(box_unscale(*intercept, QUANTILE_INTERCEPT));
                    }
                    (AcceptanceTacticKind::Quantile, _) => genes.extend([0.5, 0.5]),
                    (
                        AcceptanceTacticKind::FixedThreshold,
                        Some(AcceptanceTactic::FixedThreshold { threshold }),
                    ) => genes.push(*threshold),
                    (AcceptanceTacticKind::FixedThreshold, _) => genes.push(0.5),
                    _ => {}
                }
            }
        }
        genes.extend(bounds_to_duration_genes(&strategy.bidding_bounds)?);
        for (candidates, tactic) in self.bidding.iter().zip(&strategy.bidding_phases) {
            if !candidates.iter().any(|k| k.matches(tactic)) {
                return None;
            }
            for kind in candidates {
                let hit = kind.matches(tactic);
                genes.push(if hit { 0.9 } else { 0.1 });
                match (kind, hit) {
                    (BiddingTacticKind::Boulware, true) => {
                        if let BiddingTactic::Boulware { exponent } = tactic {
                            genes.push(box_unscale(*exponent, BOULWARE_EXPONENT));
                        }
                    }
                    (BiddingTacticKind::Boulware, false) => genes.push(0.5),
                    (BiddingTacticKind::ParetoSelect, true) => {
                        if let BiddingTactic::ParetoSelect { slope, intercept } = tactic {
                            genes.push(box_unscale(*slope, PARETO_SLOPE));
                            genes.push(box_unscale(*intercept, PARETO_INTERCEPT));
                        }
                    }
                    (BiddingTacticKind::ParetoSelect, false) => genes.extend([0.5, 0.5]),
                    _ => {}
                }
            }
        }
        debug_assert_eq!(genes.len(), self.gene_count());
        Some(genes)
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Softmax over scaled genes, floored at [`MIN_PHASE`]; the final bound is
/// forced to exactly 1.
fn durations_to_bounds(genes: &[f64]) -> Vec<f64> {
    let n = genes.len();
    let logits: Vec<f64> = genes.iter().map(|g| 4.0 * (g - 0.5)).collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let free = 1.0 - MIN_PHASE * n as f64;
    let mut bounds = Vec::with_capacity(n + 1);
    bounds.push(0.0);
    let mut acc = 0.0;
    for (i, e) in exps.iter().enumerate() {
        acc += MIN_PHASE + free * e / total;
        bounds.push(if i + 1 == n { 1.0 } else { acc });
    }
    bounds
}

fn bounds_to_duration_genes(bounds: &[f64]) -> Option<Vec<f64>> {
    let n = bounds.len() - 1;
    let free = 1.0 - MIN_PHASE * n as f64;
    if free <= 0.0 {
        return None;
    }
    let shares: Vec<f64> = bounds
        .windows(2)
        .map(|w| (((w[1] - w[0]) - MIN_PHASE) / free).max(1e-6))
        .collect();
    let logits: Vec<f64> = shares.iter().map(|s| s.ln()).collect();
    // midrange centering: softmax is shift-invariant, and any decodable
    // strategy has a logit span of at most 4, so this never clamps
    let hi = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = logits.iter().cloned().fold(f64::INFINITY, f64::min);
    let center = (hi + lo) / 2.0;
    Some(logits.iter().map(|l| (0.5 + (l - center) / 4.0).clamp(0.0, 1.0)).collect())
}

/// Constructor shared by scripted opponents: true utility, domain, config.
pub type OpponentFactory = std::sync::Arc<
    dyn Fn(&LinearAdditiveUtility, &Domain, &SessionConfig) -> Result<Box<dyn crate::protocol::Negotiator>>
        + Send
        + Sync,
>;

/// Builds one opponent instance per session during template learning.
#[derive(Clone)]
pub enum OpponentSpec {
    Baseline(BaselineKind),
    /// Arbitrary (scripted) opponents, mainly for oracles and experiments.
    Custom { label: String, factory: OpponentFactory },
}

impl std::fmt::Debug for OpponentSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OpponentSpec::Baseline(kind) => write!(f, "Baseline({})", kind.label()),
            OpponentSpec::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

impl From<BaselineKind> for OpponentSpec {
    fn from(kind: BaselineKind) -> Self {
        OpponentSpec::Baseline(kind)
    }
}

impl OpponentSpec {
    fn build(
        &self,
        utility: &LinearAdditiveUtility,
        domain: &Domain,
        config: &SessionConfig,
    ) -> Result<Box<dyn crate::protocol::Negotiator>> {
        match self {
            OpponentSpec::Baseline(kind) => build_baseline(kind, utility, domain, config),
            OpponentSpec::Custom { factory, .. } => factory(utility, domain, config),
        }
    }
}

/// One cell of the template-learning training matrix.
#[derive(Debug, Clone)]
pub struct TrainingScenario {
    pub domain: Domain,
    /// The learner's true utility; template learning is the one stage where
    /// the true user model is available.
    pub own_utility: LinearAdditiveUtility,
    pub opponent_utility: LinearAdditiveUtility,
    pub opponent: OpponentSpec,
}

#[derive(Debug, Clone)]
pub struct LearnParams {
    pub session: SessionConfig,
    /// Sessions per scenario and role.
    pub repeats: u32,
    pub seed: u64,
    pub fa: FaParams,
}

/// A learned strategy with its training fitness.
#[derive(Debug, Clone)]
pub struct Learned {
    pub strategy: ConcreteStrategy,
    /// Mean settled true utility over the training matrix.
    pub fitness: f64,
    pub evaluations: u64,
}

/// Mean settled true utility of `strategy` over the training matrix; the
/// re-simulation oracle behind template learning.
pub fn strategy_fitness(
    strategy: &ConcreteStrategy,
    scenarios: &[TrainingScenario],
    drl: Option<&DdpgModel>,
    params: &LearnParams,
) -> Result<f64> {
    if scenarios.is_empty() {
        return Err(Error::Config("training matrix is empty".into()));
    }
    let mut total = 0.0;
    let mut sessions = 0u32;
    for (scenario_idx, scenario) in scenarios.iter().enumerate() {
        for repeat in 0..params.repeats {
            for first_mover in [true, false] {
                let stream_id =
                    ((scenario_idx as u64 * params.repeats as u64 + repeat as u64) << 1)
                        | first_mover as u64;
                let seed = rng::derive(params.seed, stream_id);
                let mut ours = crate::agents::StrategyAgent::new(
                    "learner",
                    strategy.clone(),
                    scenario.own_utility.clone(),
                    &scenario.domain,
                    &params.session,
                    drl.cloned(),
                    false,
                    seed,
                )?;
                let mut theirs = scenario.opponent.build(
                    &scenario.opponent_utility,
                    &scenario.domain,
                    &params.session,
                )?;
                let setup = SessionSetup {
                    domain: &scenario.domain,
                    utility_a: if first_mover { &scenario.own_utility } else { &scenario.opponent_utility },
                    utility_b: if first_mover { &scenario.opponent_utility } else { &scenario.own_utility },
                    config: params.session,
                };
                let log = if first_mover {
                    run_session(&setup, &mut ours, &mut *theirs, seed)?
                } else {
                    run_session(&setup, &mut *theirs, &mut ours, seed)?
                };
                total += if first_mover { log.settlement.0 } else { log.settlement.1 };
                sessions += 1;
            }
        }
    }
    Ok(total / sessions as f64)
}

/// Learns template parameters by firefly search over the gene box, seeding
/// the swarm with the neutral genes and any extra starting strategies, so
/// the result is never worse than the seeds on the training matrix.
pub fn learn_template_params(
    template: &StrategyTemplate,
    scenarios: &[TrainingScenario],
    drl: Option<&DdpgModel>,
    params: &LearnParams,
    extra_seeds: &[ConcreteStrategy],
) -> Result<Learned> {
    template.validate()?;
    if scenarios.is_empty() {
        return Err(Error::Config("training matrix is empty".into()));
    }
    let dim = template.gene_count();
    let bounds = vec![(0.0, 1.0); dim];
    let mut inits = vec![template.neutral_genes()];
    for seed_strategy in extra_seeds {
        if let Some(genes) = template.encode(seed_strategy) {
            inits.push(genes);
        }
    }
    inits.truncate(params.fa.population);

    let evaluations = AtomicU64::new(0);
    let fitness = |genes: &[f64]| {
        evaluations.fetch_add(1, Ordering::Relaxed);
        let strategy = match template.decode(genes) {
            Ok(s) => s,
            Err(_) => return f64::NEG_INFINITY,
        };
        strategy_fitness(&strategy, scenarios, drl, params).unwrap_or(f64::NEG_INFINITY)
    };
    let (best_genes, best_fitness) =
        firefly_optimize_with_inits(fitness, dim, &bounds, &params.fa, &inits)?;
    Ok(Learned {
        strategy: template.decode(&best_genes)?,
        fitness: best_fitness,
        evaluations: evaluations.into_inner(),
    })
}
