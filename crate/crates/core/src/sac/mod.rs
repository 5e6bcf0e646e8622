//! Per-vehicle soft actor-critic power control.

mod agent;
mod replay;

pub use agent::{
    actor_loss_grad, critic_input, critic_loss_grad, temperature_grad, ActorEval, Batch, Losses,
    SacModel, TrainStats,
};
pub use replay::{ReplayBuffer, Transition};

use crate::config::ScenarioConfig;

/// Observation length: gain, head AoI, system AoI, distance, head size, vehicle count.
pub const STATE_DIM: usize = 6;
/// Critic input length: the observation plus the normalized power.
pub const CRITIC_DIM: usize = STATE_DIM + 1;

/// Raw per-vehicle observation before normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    /// Linear channel power gain towards the RSU.
    pub gain: f64,
    /// AoI of the head task, s (0 for an empty queue).
    pub head_aoi: f64,
    pub system_aoi: f64,
    /// Distance to the RSU, m.
    pub distance: f64,
    /// Head task size, bits (0 for an empty queue).
    pub head_size: f64,
    pub n_vehicles: usize,
}

/// Normalized state vector fed to actor and critics.
pub fn build_state(obs: &Observation, cfg: &ScenarioConfig) -> [f64; STATE_DIM] {
    let gain_db = 10.0 * obs.gain.max(1e-30).log10();
    [
        gain_db / cfg.norm_gain_db,
        obs.head_aoi / cfg.norm_aoi,
        obs.system_aoi / cfg.norm_aoi,
        obs.distance / cfg.rsu_radius,
        obs.head_size / cfg.task_size_max,
        obs.n_vehicles as f64 / cfg.norm_vehicles,
    ]
}
