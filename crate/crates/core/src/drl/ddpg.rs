//! DDPG learner for the dynamic threshold utility: a sigmoid-squashed actor
//! maps the agent state to a threshold in \[0,1\], a critic scores
//! (state, threshold) pairs, and target copies of both are soft-updated.
//! Experiences live in a ring buffer; training samples K of them per step.
//! Supervised pretraining fits the actor to logged (state, threshold) pairs
//! before any reinforcement learning happens.

use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::domain::{discounted_utility, write_json};
use crate::drl::mlp::{Activation, Gradients, Mlp};
use crate::error::{Error, Result};
use crate::protocol::AgentState;
use crate::rng;

/// Length of the feature vector produced by [`featurize`].
pub const STATE_DIM: usize = 9;

/// Fixed-order, unit-clamped features of an [`AgentState`].
pub fn featurize(state: &AgentState) -> [f64; STATE_DIM] {
    let clamp = |x: f64| x.clamp(0.0, 1.0);
    [
        clamp(state.o_best),
        clamp(state.o_avg),
        clamp(state.o_sd),
        clamp(state.b_count as f64 / state.omega_size.max(1) as f64),
        clamp(state.discount),
        clamp(state.reservation),
        clamp((state.omega_size.max(1) as f64).log10() / 6.0),
        clamp(state.n_issues as f64 / 10.0),
        clamp(state.t),
    ]
}

/// What happened this turn, for reward purposes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardEvent {
    Agreement { utility: f64 },
    ReceivedOffer { utility: f64 },
    Otherwise,
}

/// Reward: discounted utility of the agreed or received bid, −1 otherwise.
pub fn compute_reward(event: RewardEvent, t: f64, d: f64) -> Result<f64> {
    match event {
        RewardEvent::Agreement { utility } | RewardEvent::ReceivedOffer { utility } => {
            if !(0.0..=1.0).contains(&utility) {
                return Err(Error::OutOfRange(format!("utility {utility} outside [0,1]")));
            }
            discounted_utility(utility, t, d)
        }
        RewardEvent::Otherwise => Ok(-1.0),
    }
}

/// One transition ⟨s, a, r, s′⟩ with a terminal flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: f64,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ReplayBuffer {
    entries: Vec<Experience>,
    capacity: usize,
    cursor: usize,
}

impl ReplayBuffer {
    fn new(capacity: usize) -> Self {
        ReplayBuffer { entries: Vec::with_capacity(capacity.min(4096)), capacity, cursor: 0 }
    }

    fn push(&mut self, exp: Experience) {
        if self.entries.len() < self.capacity {
            self.entries.push(exp);
        } else {
            self.entries[self.cursor] = exp;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    fn len(&self) -> usize {
        self.entries.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DdpgConfig {
    pub hidden: [usize; 2],
    /// Hidden-layer activation; finite-difference validation needs a smooth
    /// landscape, production uses relu.
    #[serde(default = "default_hidden_activation")]
    pub hidden_activation: Activation,
    /// Discount γ for the TD target.
    pub gamma: f64,
    /// Soft-update rate τ.
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Replay capacity N.
    pub capacity: usize,
    /// Batch size K; must stay below N.
    pub batch: usize,
    /// Gaussian exploration σ.
    pub noise_sigma: f64,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        DdpgConfig {
            hidden: [64, 64],
            hidden_activation: Activation::Relu,
            gamma: 0.99,
            tau: 0.005,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            capacity: 50_000,
            batch: 64,
            noise_sigma: 0.1,
        }
    }
}

fn default_hidden_activation() -> Activation {
    Activation::Relu
}

/// Diagnostics of one training step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainDiagnostics {
    pub performed: bool,
    pub critic_loss: f64,
    pub actor_objective: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DdpgModel {
    config: DdpgConfig,
    actor: Mlp,
    critic: Mlp,
    actor_target: Mlp,
    critic_target: Mlp,
    replay: ReplayBuffer,
    train_steps: u64,
}

impl DdpgModel {
    pub fn new(config: DdpgConfig, seed: u64) -> Result<Self> {
        if config.batch == 0 || config.batch >= config.capacity {
            return Err(Error::Config(format!(
                "batch {} must satisfy 0 < K < N = {}",
                config.batch, config.capacity
            )));
        }
        let actor_sizes = [STATE_DIM, config.hidden[0], config.hidden[1], 1];
        let critic_sizes = [STATE_DIM + 1, config.hidden[0], config.hidden[1], 1];
        let mut init = rng::stream(seed, 0);
        let actor = Mlp::new(&actor_sizes, config.hidden_activation, Activation::Sigmoid, &mut init)?;
        let critic = Mlp::new(&critic_sizes, config.hidden_activation, Activation::Identity, &mut init)?;
        Ok(DdpgModel {
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            replay: ReplayBuffer::new(config.capacity),
            train_steps: 0,
            config,
        })
    }

    pub fn config(&self) -> &DdpgConfig {
        &self.config
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn actor_mut(&mut self) -> &mut Mlp {
        &mut self.actor
    }

    pub fn all_finite(&self) -> bool {
        self.actor.all_finite()
            && self.critic.all_finite()
            && self.actor_target.all_finite()
            && self.critic_target.all_finite()
    }

    /// ū_t for a state: deterministic actor forward pass, in \[0,1\] by
    /// construction of the output squashing.
    pub fn threshold(&self, state: &AgentState) -> Result<f64> {
        self.threshold_from_features(&featurize(state))
    }

    pub fn threshold_from_features(&self, features: &[f64]) -> Result<f64> {
        if features.len() != STATE_DIM {
            return Err(Error::Config(format!(
                "expected {STATE_DIM} features, got {}",
                features.len()
            )));
        }
        if features.iter().any(|f| !f.is_finite()) {
            return Err(Error::OutOfRange("non-finite state feature".into()));
        }
        Ok(self.actor.forward(features)[0])
    }

    /// Threshold with clipped Gaussian exploration noise, for training runs.
    pub fn exploring_threshold(&self, state: &AgentState, rng: &mut rng::Rng) -> Result<f64> {
        let base = self.threshold(state)?;
        let (u1, u2): (f64, f64) = (rng.gen_range(1e-12..1.0), rng.gen());
        let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        Ok((base + self.config.noise_sigma * z).clamp(0.0, 1.0))
    }

    /// Stores one experience, evicting the oldest past capacity.
    pub fn remember(&mut self, exp: Experience) -> Result<()> {
        if exp.state.len() != STATE_DIM || exp.next_state.len() != STATE_DIM {
            return Err(Error::Config("experience feature length mismatch".into()));
        }
        if !(-1.0..=1.0).contains(&exp.reward) {
            return Err(Error::OutOfRange(format!("reward {} outside [-1,1]", exp.reward)));
        }
        self.replay.push(exp);
        Ok(())
    }

    fn critic_input(state: &[f64], action: f64) -> Vec<f64> {
        let mut input = Vec::with_capacity(STATE_DIM + 1);
        input.extend_from_slice(state);
        input.push(action);
        input
    }

    /// Mean squared TD error and its critic-parameter gradients on a batch.
    fn critic_loss_and_grads(&self, batch: &[&Experience]) -> (f64, Gradients) {
        let k = batch.len() as f64;
        let mut grads = Gradients::zeros_like(&self.critic);
        let mut loss = 0.0;
        for exp in batch {
            let target = if exp.terminal {
                exp.reward
            } else {
                let next_action = self.actor_target.forward(&exp.next_state)[0];
                let q_next =
                    self.critic_target.forward(&Self::critic_input(&exp.next_state, next_action))[0];
                exp.reward + self.config.gamma * q_next
            };
            let trace = self.critic.forward_cached(&Self::critic_input(&exp.state, exp.action));
            let residual = trace.output()[0] - target;
            loss += residual * residual / k;
            let (g, _) = self.critic.backward(&trace, &[2.0 * residual / k]);
            grads.add(&g);
        }
        (loss, grads)
    }

    /// Mean critic value of the actor's own actions, with gradients for the
    /// actor parameters (ascent direction).
    fn actor_objective_and_grads(&self, batch: &[&Experience]) -> (f64, Gradients) {
        let k = batch.len() as f64;
        let mut grads = Gradients::zeros_like(&self.actor);
        let mut objective = 0.0;
        for exp in batch {
            let actor_trace = self.actor.forward_cached(&exp.state);
            let action = actor_trace.output()[0];
            let critic_trace = self.critic.forward_cached(&Self::critic_input(&exp.state, action));
            objective += critic_trace.output()[0] / k;
            let (_, input_grad) = self.critic.backward(&critic_trace, &[1.0 / k]);
            let dq_da = input_grad[STATE_DIM];
            let (g, _) = self.actor.backward(&actor_trace, &[dq_da]);
            grads.add(&g);
        }
        (objective, grads)
    }

    /// One DDPG update: critic regression toward the TD target, actor ascent
    /// on the critic, soft target update. No-op until the replay holds a
    /// full batch.
    pub fn train_step(&mut self, seed: u64) -> TrainDiagnostics {
        if self.replay.len() < self.config.batch {
            return TrainDiagnostics { performed: false, critic_loss: 0.0, actor_objective: 0.0 };
        }
        let mut rng = rng::stream(seed, self.train_steps);
        let batch: Vec<&Experience> = (0..self.config.batch)
            .map(|_| &self.replay.entries[rng.gen_range(0..self.replay.len())])
            .collect();

        let (critic_loss, critic_grads) = self.critic_loss_and_grads(&batch);
        let (actor_objective, actor_grads) = self.actor_objective_and_grads(&batch);
        self.critic.apply_gradients(&critic_grads, self.config.critic_lr);
        // gradient ascent on the critic's estimate
        let mut ascent = actor_grads;
        ascent.scale(-1.0);
        self.actor.apply_gradients(&ascent, self.config.actor_lr);
        self.actor_target.soft_update_from(&self.actor, self.config.tau);
        self.critic_target.soft_update_from(&self.critic, self.config.tau);
        self.train_steps += 1;
        TrainDiagnostics { performed: true, critic_loss, actor_objective }
    }

    /// Squared-error regression of the actor onto (features, threshold)
    /// pairs, SGD with momentum 0.9. Returns the mean loss per epoch,
    /// measured before that epoch's updates; targets are re-synced to the
    /// actor afterwards.
    pub fn pretrain_supervised(
        &mut self,
        dataset: &[(Vec<f64>, f64)],
        epochs: usize,
        seed: u64,
    ) -> Result<Vec<f64>> {
        if dataset.is_empty() {
            return Err(Error::Config("pretraining dataset is empty".into()));
        }
        if dataset.iter().any(|(f, _)| f.len() != STATE_DIM) {
            return Err(Error::Config("pretraining feature length mismatch".into()));
        }
        const MOMENTUM: f64 = 0.9;
        let mut velocity = Gradients::zeros_like(&self.actor);
        let mut curve = Vec::with_capacity(epochs);
        for epoch in 0..epochs {
            let mut rng = rng::stream(seed, epoch as u64);
            let mut order: Vec<usize> = (0..dataset.len()).collect();
            // Fisher-Yates
            for i in (1..order.len()).rev() {
                order.swap(i, rng.gen_range(0..=i));
            }
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(self.config.batch.min(dataset.len())) {
                let k = chunk.len() as f64;
                let mut grads = Gradients::zeros_like(&self.actor);
                for &idx in chunk {
                    let (features, target) = &dataset[idx];
                    let trace = self.actor.forward_cached(features);
                    let residual = trace.output()[0] - target;
                    epoch_loss += residual * residual / dataset.len() as f64;
                    let (g, _) = self.actor.backward(&trace, &[2.0 * residual / k]);
                    grads.add(&g);
                }
                velocity.scale(MOMENTUM);
                velocity.add(&grads);
                self.actor.apply_gradients(&velocity, self.config.actor_lr);
            }
            curve.push(epoch_loss);
        }
        self.actor_target = self.actor.clone();
        Ok(curve)
    }

    /// Versioned JSON checkpoint: layer shapes plus flat parameter arrays.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = CheckpointFile {
            version: CHECKPOINT_VERSION,
            config: self.config,
            actor_sizes: self.actor.sizes().to_vec(),
            critic_sizes: self.critic.sizes().to_vec(),
            actor: self.actor.params(),
            critic: self.critic.params(),
            actor_target: self.actor_target.params(),
            critic_target: self.critic_target.params(),
        };
        write_json(path.as_ref(), &file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let file: CheckpointFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        if file.version != CHECKPOINT_VERSION {
            return Err(Error::Parse {
                path: path.display().to_string(),
                detail: format!("unsupported checkpoint version {}", file.version),
            });
        }
        let mut model = DdpgModel::new(file.config, 0)?;
        if model.actor.sizes() != file.actor_sizes || model.critic.sizes() != file.critic_sizes {
            return Err(Error::Parse {
                path: path.display().to_string(),
                detail: "checkpoint layer shapes disagree with its config".into(),
            });
        }
        model.actor.set_params(&file.actor)?;
        model.critic.set_params(&file.critic)?;
        model.actor_target.set_params(&file.actor_target)?;
        model.critic_target.set_params(&file.critic_target)?;
        Ok(model)
    }
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    config: DdpgConfig,
    actor_sizes: Vec<usize>,
    critic_sizes: Vec<usize>,
    actor: Vec<f64>,
    critic: Vec<f64>,
    actor_target: Vec<f64>,
    critic_target: Vec<f64>,
}
