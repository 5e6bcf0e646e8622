//! FIFO task queues, age-of-information bookkeeping, the departure penalty and
//! the per-vehicle reward.

use std::collections::VecDeque;

use crate::config::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Task {
    /// Size in bits.
    pub size: f64,
    /// Bits still to send. Only the head is ever transmitted and a head is
    /// either delivered whole within a slot or not at all, so this stays equal
    /// to `size`; it is kept for accounting.
    pub remaining: f64,
    /// Age of information, s.
    pub aoi: f64,
}

impl Task {
    pub fn new(size: f64) -> Self {
        Self {
            size,
            remaining: size,
            aoi: 0.0,
        }
    }
}

/// Outcome of one queue step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QueueStep {
    pub delivered_bits: f64,
    pub delivered_tasks: usize,
    /// Final AoI of the delivered task, 0 when nothing was delivered.
    pub delivered_aoi: f64,
}

/// Tasks awaiting upload, oldest first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskQueue {
    tasks: VecDeque<Task>,
}

impl TaskQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, task: Task) {
        self.tasks.push_back(task);
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn head(&self) -> Option<&Task> {
        self.tasks.front()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Task> {
        self.tasks.iter()
    }

    /// Advances every task's age by one slot at the given uplink rate.
    ///
    /// The head is delivered when `rate * slot >= size`; its age grows by the
    /// transmission time `size / rate` and it leaves the queue. Otherwise the
    /// head waits and ages by `slot`. Every other task ages by `slot`. At most
    /// one task is delivered per slot.
    pub fn step(&mut self, rate: f64, slot: f64) -> QueueStep {
        let mut out = QueueStep::default();
        let Some(head) = self.tasks.front_mut() else {
            return out;
        };
        if rate > 0.0 && rate * slot >= head.size {
            head.aoi += head.size / rate;
            out.delivered_bits = head.size;
            out.delivered_tasks = 1;
            out.delivered_aoi = head.aoi;
            self.tasks.pop_front();
        } else {
            head.aoi += slot;
        }
        let skip = if out.delivered_tasks == 1 { 0 } else { 1 };
        for t in self.tasks.iter_mut().skip(skip) {
            t.aoi += slot;
        }
        out
    }

    /// Mean AoI over queued tasks; 0 for an empty queue.
    pub fn average_aoi(&self) -> f64 {
        if self.tasks.is_empty() {
            0.0
        } else {
            self.tasks.iter().map(|t| t.aoi).sum::<f64>() / self.tasks.len() as f64
        }
    }
}

/// Mean of per-vehicle average AoIs; 0 with no vehicles.
pub fn system_average_aoi(vehicle_averages: &[f64]) -> f64 {
    if vehicle_averages.is_empty() {
        0.0
    } else {
        vehicle_averages.iter().sum::<f64>() / vehicle_averages.len() as f64
    }
}

/// Departure penalty `xi`, starting at 0.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PenaltyState {
    pub xi: f64,
}

impl PenaltyState {
    /// With departures, adds the departing vehicles' average AoIs divided by
    /// the slot's vehicle count `n_vehicles`; otherwise decays by `decay`.
    pub fn step(&mut self, departed_averages: &[f64], n_vehicles: usize, decay: f64) -> f64 {
        if departed_averages.is_empty() {
            self.xi *= decay;
        } else {
            let n = n_vehicles.max(1) as f64;
            self.xi += departed_averages.iter().sum::<f64>() / n;
        }
        self.xi
    }
}

/// Scaled per-vehicle reward.
///
/// `-(system_aoi + p * w + xi * penalty_weight) * reward_scale` with
/// `w = 1 + system_aoi / head_aoi` while tasks are queued and
/// `w = 1 + system_aoi` otherwise. `head_aoi` is floored at one slot.
pub fn reward(
    system_aoi: f64,
    head_aoi: f64,
    power: f64,
    task_count: usize,
    xi: f64,
    cfg: &ScenarioConfig,
) -> f64 {
    let weight = if task_count > 0 {
        1.0 + system_aoi / head_aoi.max(cfg.slot)
    } else {
        1.0 + system_aoi
    };
    -(system_aoi + power * weight + xi * cfg.penalty_weight) * cfg.reward_scale
}
