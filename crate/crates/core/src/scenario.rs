//! Vehicle arrivals, motion, departures and task generation.
//!
//! Vehicles enter each lane at `x = -D_r` according to independent Poisson
//! processes, move at their lane's constant speed and leave once `x > D_r`.
//! Each vehicle generates tasks with exponential inter-generation times.

use crate::aoi::{Task, TaskQueue};
use crate::channel::ChannelState;
use crate::config::ScenarioConfig;
use crate::rng::RngStream;
use crate::sac::{Losses, ReplayBuffer, SacModel, Transition, STATE_DIM};

/// A transition waiting for its successor state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendingTransition {
    pub state: [f64; STATE_DIM],
    pub action: f64,
    pub reward: f64,
}

#[derive(Debug, Clone)]
pub struct VehicleState {
    pub id: u64,
    pub lane: usize,
    /// Longitudinal position, m; the road spans `[-D_r, D_r]`.
    pub x: f64,
    pub y: f64,
    /// m/s, fixed at spawn.
    pub speed: f64,
    pub spawn_time: f64,
    pub next_task_time: f64,
    pub channel: ChannelState,
    pub queue: TaskQueue,
    pub sac: SacModel,
    pub replay: ReplayBuffer<Transition>,
    /// Local SAC iterations per training round.
    pub iterations: usize,
    /// Times this vehicle has joined a local aggregation.
    pub local_agg_count: usize,
    pub last_losses: Losses,
    pub pending: Option<PendingTransition>,
    /// Offloading probability of the game-based baseline.
    pub offload_prob: f64,
    /// Power chosen in the current slot, W.
    pub power: f64,
}

impl VehicleState {
    /// A vehicle entering `lane` at time `now` with the downloaded `sac` model.
    pub fn spawn(
        id: u64,
        lane: usize,
        now: f64,
        sac: SacModel,
        cfg: &ScenarioConfig,
        rng: &mut RngStream,
    ) -> Self {
        let x = -cfg.rsu_radius;
        let y = cfg.lane_y(lane);
        let speed = cfg.lane_speed(lane);
        let channel = ChannelState::spawn((x, y), speed, cfg, rng);
        let iterations = cfg.iteration_choices[rng.index(cfg.iteration_choices.len())];
        let next_task_time = now + rng.exponential(cfg.task_mean_interval);
        Self {
            id,
            lane,
            x,
            y,
            speed,
            spawn_time: now,
            next_task_time,
            channel,
            queue: TaskQueue::new(),
            sac,
            replay: ReplayBuffer::new(cfg.replay_capacity),
            iterations,
            local_agg_count: 0,
            last_losses: Losses::default(),
            pending: None,
            offload_prob: 0.0,
            power: 0.0,
        }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

/// Per-lane Poisson arrival clocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalProcess {
    next: Vec<f64>,
}

impl ArrivalProcess {
    pub fn new(cfg: &ScenarioConfig, rng: &mut RngStream) -> Self {
        let next = (0..cfg.lanes)
            .map(|l| rng.exponential(1.0 / cfg.lane_rate(l)))
            .collect();
        Self { next }
    }

    /// Lanes of the vehicles whose arrival clock fires in `[now, now + slot)`,
    /// one entry per vehicle, in lane order.
    pub fn advance(&mut self, now: f64, cfg: &ScenarioConfig, rng: &mut RngStream) -> Vec<usize> {
        let end = now + cfg.slot;
        let mut lanes = Vec::new();
        for (lane, next) in self.next.iter_mut().enumerate() {
            while *next < end {
                lanes.push(lane);
                *next += rng.exponential(1.0 / cfg.lane_rate(lane));
            }
        }
        lanes
    }
}

/// Moves every vehicle by `speed * slot` and removes those past `D_r`,
/// returning the departed vehicles in their original order.
pub fn advance_positions(
    vehicles: &mut Vec<VehicleState>,
    cfg: &ScenarioConfig,
) -> Vec<VehicleState> {
    let mut departed = Vec::new();
    let mut kept = Vec::with_capacity(vehicles.len());
    for mut v in vehicles.drain(..) {
        let x = v.x + v.speed * cfg.slot;
        if x > cfg.rsu_radius {
            departed.push(v);
        } else {
            v.x = x;
            kept.push(v);
        }
    }
    *vehicles = kept;
    departed
}

/// Appends a task when the vehicle's generation clock has fired and advances
/// the clock by a fresh exponential gap from the firing instant, so the
/// generation times form an exact Poisson process. Returns the new task's
/// size; call until `None` to drain a slot.
pub fn generate_task(
    vehicle: &mut VehicleState,
    now: f64,
    cfg: &ScenarioConfig,
    rng: &mut RngStream,
) -> Option<f64> {
    if vehicle.next_task_time > now {
        return None;
    }
    let size = rng.uniform_range(cfg.task_size_min, cfg.task_size_max);
    vehicle.queue.push(Task::new(size));
    vehicle.next_task_time += rng.exponential(cfg.task_mean_interval);
    Some(size)
}
