//! Threshold-utility learning: a from-scratch MLP and a DDPG actor-critic
//! that maps the agent state to the dynamic threshold ū_t, with replay
//! buffer, supervised pretraining and reward shaping.

pub mod ddpg;
pub mod mlp;

pub use ddpg::{
    compute_reward, featurize, DdpgConfig, DdpgModel, Experience, RewardEvent, TrainDiagnostics,
    STATE_DIM,
};
pub use mlp::{Activation, Gradients, Mlp};
