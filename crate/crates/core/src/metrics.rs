//! Tournament evaluation metrics, aggregated per agent over session logs:
//! average rounds to agreement, average minimal distance of agreements from
//! the true Pareto front, social utility, individual utility over all and
//! over successful sessions, and the success rate. Distances are measured
//! against the true-utility front even though agents only ever see
//! estimates.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::LinearAdditiveUtility;
use crate::error::{Error, Result};
use crate::pareto::{brute_force_front, ParetoFront, ENUMERATION_CAP};
use crate::protocol::{Outcome, SessionLog};

/// Mean and population standard deviation of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStat {
    pub mean: f64,
    pub sd: f64,
}

fn stat(values: &[f64]) -> MetricStat {
    if values.is_empty() {
        return MetricStat { mean: 0.0, sd: 0.0 };
    }
    // summing in sorted order makes the result bit-identical under any
    // permutation of the sessions
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite metric"));
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    let var =
        sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / sorted.len() as f64;
    MetricStat { mean, sd: var.max(0.0).sqrt() }
}

/// One agent's aggregate row. Agreement-conditioned metrics report 0 when
/// the agent never reached an agreement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub agent: String,
    pub sessions: u32,
    pub agreements: u32,
    /// R_avg: rounds to agreement.
    pub rounds: MetricStat,
    /// P_avg: minimal distance of agreements from the true Pareto front.
    pub pareto_distance: MetricStat,
    /// U_soc: joint settled utility of agreements.
    pub social: MetricStat,
    /// U_ind over all sessions (failures settle at the reservation).
    pub individual_total: MetricStat,
    /// U_ind over successful sessions only.
    pub individual_success: MetricStat,
    /// S_%: proportion of successful sessions.
    pub success_rate: MetricStat,
}

#[derive(Default)]
struct Tally {
    settled: Vec<f64>,
    settled_success: Vec<f64>,
    rounds: Vec<f64>,
    social: Vec<f64>,
    pareto: Vec<f64>,
    success: Vec<f64>,
}

fn front_key(utilities: &[LinearAdditiveUtility; 2]) -> u64 {
    // structural fingerprint; collisions only merge identical fronts anyway
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    let mut mix = |bits: u64| {
        hash ^= bits;
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    };
    for u in utilities {
        for w in u.weights() {
            mix(w.to_bits());
        }
        for row in u.evaluations() {
            for e in row {
                mix(e.to_bits());
            }
        }
    }
    hash
}

/// Aggregates the six tournament metrics per agent. Every log must be
/// internally consistent; the true Pareto front per (domain, profile pair)
/// is brute-forced once and shared.
pub fn compute_metrics(logs: &[SessionLog]) -> Result<Vec<MetricsRow>> {
    if logs.is_empty() {
        return Err(Error::Config("no sessions to aggregate".into()));
    }
    let mut fronts: HashMap<(String, u64), ParetoFront> = HashMap::new();
    let mut tallies: HashMap<String, Tally> = HashMap::new();
    let mut order: Vec<String> = Vec::new();

    for log in logs {
        let key = (log.domain.name.clone(), front_key(&log.utilities));
        if !fronts.contains_key(&key) {
            let (ua, ub) = (&log.utilities[0], &log.utilities[1]);
            let front = brute_force_front(
                |bid| (ua.utility(bid).unwrap_or(0.0), ub.utility(bid).unwrap_or(0.0)),
                &log.domain,
                ENUMERATION_CAP,
            )?;
            fronts.insert(key.clone(), front);
        }
        let front = &fronts[&key];

        let agreement = match &log.outcome {
            Outcome::Agreement { bid, round } => {
                let point =
                    (log.utilities[0].utility(bid)?, log.utilities[1].utility(bid)?);
                let distance = front
                    .entries()
                    .iter()
                    .map(|e| {
                        let (du, dv) = (e.own - point.0, e.opponent - point.1);
                        (du * du + dv * dv).sqrt()
                    })
                    .fold(f64::INFINITY, f64::min);
                Some((*round, distance))
            }
            Outcome::Failure => None,
        };

        for side in 0..2 {
            let name = log.agents[side].clone();
            if !tallies.contains_key(&name) {
                order.push(name.clone());
            }
            let tally = tallies.entry(name).or_default();
            let settled = if side == 0 { log.settlement.0 } else { log.settlement.1 };
            tally.settled.push(settled);
            match &agreement {
                Some((round, distance)) => {
                    tally.settled_success.push(settled);
                    tally.rounds.push(*round as f64);
                    tally.social.push(log.settlement.0 + log.settlement.1);
                    tally.pareto.push(*distance);
                    tally.success.push(1.0);
                }
                None => tally.success.push(0.0),
            }
        }
    }

    Ok(order
        .into_iter()
        .map(|agent| {
            let tally = &tallies[&agent];
            MetricsRow {
                sessions: tally.settled.len() as u32,
                agreements: tally.settled_success.len() as u32,
                rounds: stat(&tally.rounds),
                pareto_distance: stat(&tally.pareto),
                social: stat(&tally.social),
                individual_total: stat(&tally.settled),
                individual_success: stat(&tally.settled_success),
                success_rate: stat(&tally.success),
                agent,
            }
        })
        .collect())
}

fn cell(stat: &MetricStat) -> String {
    format!("{:.4}±{:.4}", stat.mean, stat.sd)
}

/// CSV with one row per agent, `mean±sd` cells, columns in table order.
pub fn metrics_to_csv(rows: &[MetricsRow]) -> String {
    let mut out =
        String::from("agent,sessions,agreements,R_avg,P_avg,U_soc,U_ind_total,U_ind_s,S_pct\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.agent,
            row.sessions,
            row.agreements,
            cell(&row.rounds),
            cell(&row.pareto_distance),
            cell(&row.social),
            cell(&row.individual_total),
            cell(&row.individual_success),
            cell(&row.success_rate),
        ));
    }
    out
}

pub fn write_metrics_csv(rows: &[MetricsRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, metrics_to_csv(rows)).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}
