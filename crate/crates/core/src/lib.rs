//! Bilateral multi-issue negotiation under preference uncertainty.
//!
//! The crate provides the building blocks of an adaptive negotiating agent —
//! user-model estimation from partial bid rankings, a frequency-based
//! opponent model, near-Pareto bidding, learnable phase-structured strategies
//! and a DDPG-learned utility threshold — together with an alternating-offers
//! session engine, baseline opponents, tournament evaluation metrics and a
//! configuration-driven tournament runner.
//!
//! Everything is deterministic given a master seed: parallel and sequential
//! builds (`parallel` feature, on by default) produce identical output.

pub mod agents;
pub mod domain;
pub mod drl;
pub mod error;
pub mod meta;
pub mod metrics;
pub mod opponent_model;
pub mod par;
pub mod pareto;
pub mod protocol;
pub mod rng;
pub mod strategy;
pub mod tournament;
pub mod user_model;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
