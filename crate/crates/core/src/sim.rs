//! The slot loop.
//!
//! Within one slot, in order: move vehicles; process departures (model
//! upload and global averaging); admit arrivals (model download); generate
//! tasks; build the road graph; observe and act; compute rates with this
//! slot's upload interference; advance queues; compute system AoI, the
//! departure penalty and rewards; store transitions; run local training,
//! local aggregation and GNN training when scheduled.

use std::sync::Arc;

use crate::aoi::{self, PenaltyState};
use crate::baselines::{self, Scheme};
use crate::channel::compute_rates;
use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::federated::{self, AuditLog, CriticPair, GlobalModelStore, UploadEvent};
use crate::graph::{self, GnnModel, GnnTransition, GraphVehicle, RoadGraph};
use crate::rng::RngStream;
use crate::sac::{self, Observation, ReplayBuffer, Transition};
use crate::scenario::{self, ArrivalProcess, PendingTransition, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Train,
    Test,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Train => "train",
            Stage::Test => "test",
        }
    }
}

/// One slot of system metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub slot: u64,
    /// Mean over present vehicles of their queue-average AoI, s.
    pub avg_aoi: f64,
    /// Mean task transmit power, W.
    pub avg_power: f64,
    pub delivered_bits: f64,
    pub n_vehicles: usize,
    pub mean_reward: f64,
}

/// Event counters of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counters {
    pub arrivals: u64,
    pub departures: u64,
    pub tasks: u64,
    pub delivered_tasks: u64,
    pub uploads: u64,
    pub local_train_rounds: u64,
    pub local_aggregations: u64,
    pub global_aggregations: u64,
    pub gnn_rounds: u64,
}

/// A simulation instance; owns every vehicle, the RSU store and the GNN.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub cfg: ScenarioConfig,
    pub scheme: Scheme,
    pub stage: Stage,
    pub slot: u64,
    pub vehicles: Vec<VehicleState>,
    pub store: GlobalModelStore,
    pub gnn: GnnModel,
    pub gnn_buffer: ReplayBuffer<GnnTransition>,
    pub penalty: PenaltyState,
    pub counters: Counters,
    pub audit: AuditLog,
    arrivals: ArrivalProcess,
    env_rng: RngStream,
    policy_rng: RngStream,
    learn_rng: RngStream,
    next_id: u64,
    carried_uploads: Vec<UploadEvent>,
    gnn_pending: Option<(Arc<RoadGraph>, Vec<f64>, f64)>,
}

const TEST_SALT: u64 = 0x7e57_5eed_0bad_cafe;

impl Simulation {
    /// A training-stage simulation with freshly initialized global models.
    pub fn new_training(cfg: &ScenarioConfig, scheme: Scheme, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut master = RngStream::new(seed);
        let env = master.fork();
        let mut init = master.fork();
        let store = GlobalModelStore::new(cfg, &mut init);
        let gnn = GnnModel::new(cfg, &mut init);
        Ok(Self::assemble(
            cfg,
            scheme,
            Stage::Train,
            store,
            gnn,
            env,
            &mut master,
        ))
    }

    /// A test-stage simulation that uses `store` frozen.
    pub fn new_test(
        cfg: &ScenarioConfig,
        scheme: Scheme,
        seed: u64,
        store: GlobalModelStore,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut master = RngStream::new(seed ^ TEST_SALT);
        let env = master.fork();
        let mut init = master.fork();
        let gnn = GnnModel::new(cfg, &mut init);
        Ok(Self::assemble(
            cfg,
            scheme,
            Stage::Test,
            store,
            gnn,
            env,
            &mut master,
        ))
    }

    fn assemble(
        cfg: &ScenarioConfig,
        scheme: Scheme,
        stage: Stage,
        store: GlobalModelStore,
        gnn: GnnModel,
        mut env_rng: RngStream,
        master: &mut RngStream,
    ) -> Self {
        let arrivals = ArrivalProcess::new(cfg, &mut env_rng);
        Self {
            cfg: cfg.clone(),
            scheme,
            stage,
            slot: 0,
            vehicles: Vec::new(),
            store,
            gnn,
            gnn_buffer: ReplayBuffer::new(cfg.gnn_replay_capacity),
            penalty: PenaltyState::default(),
            counters: Counters::default(),
            audit: AuditLog::default(),
            arrivals,
            env_rng,
            policy_rng: master.fork(),
            learn_rng: master.fork(),
            next_id: 0,
            carried_uploads: Vec::new(),
            gnn_pending: None,
        }
    }

    fn training(&self) -> bool {
        self.stage == Stage::Train && self.scheme.learns()
    }

    fn rsu(&self) -> (f64, f64) {
        (0.0, self.cfg.rsu_offset)
    }

    /// Runs `slots` slots, returning one record per slot.
    pub fn run(&mut self, slots: u64) -> Result<Vec<MetricsRecord>> {
        let mut out = Vec::with_capacity(slots as usize);
        for _ in 0..slots {
            out.push(self.step()?);
        }
        Ok(out)
    }

    pub fn step(&mut self) -> Result<MetricsRecord> {
        let cfg = self.cfg.clone();
        let now = self.slot as f64 * cfg.slot;
        let rsu = self.rsu();

        // motion and departures
        let departed = scenario::advance_positions(&mut self.vehicles, &cfg);
        for v in &mut self.vehicles {
            let pos = v.position();
            v.channel.step_shadowing(pos, &cfg, &mut self.env_rng);
            v.channel.step_rayleigh(v.speed, &cfg, &mut self.env_rng);
        }
        let n_c = self.vehicles.len() + departed.len();
        let departed_aoi: Vec<f64> = departed.iter().map(|v| v.queue.average_aoi()).collect();
        self.counters.departures += departed.len() as u64;
        let mut uploads = std::mem::take(&mut self.carried_uploads);
        if self.training()
            && matches!(self.scheme, Scheme::Fgnn | Scheme::Lfsac)
            && !departed.is_empty()
        {
            let bits = self.store.payload_bits();
            for v in &departed {
                let gain = v.channel.gain(rsu);
                uploads.push(UploadEvent {
                    vehicle: v.id,
                    payload_bits: bits,
                    power: federated::model_upload_power(gain, bits, &cfg),
                    gain,
                    slot: self.slot,
                });
            }
            let models: Vec<&sac::SacModel> = departed.iter().map(|v| &v.sac).collect();
            self.store.global_aggregate(&models)?;
            self.counters.global_aggregations += 1;
            let ids: Vec<u64> = departed.iter().map(|v| v.id).collect();
            self.audit.global(self.slot, &ids, self.store.version);
        }
        self.counters.uploads += uploads.len() as u64;
        drop(departed);

        // arrivals
        for lane in self.arrivals.advance(now, &cfg, &mut self.env_rng) {
            let model = self.store.download(&cfg);
            let v = VehicleState::spawn(self.next_id, lane, now, model, &cfg, &mut self.env_rng);
            self.next_id += 1;
            self.vehicles.push(v);
            self.counters.arrivals += 1;
        }

        // tasks
        for v in &mut self.vehicles {
            while scenario::generate_task(v, now, &cfg, &mut self.env_rng).is_some() {
                self.counters.tasks += 1;
            }
        }
        debug_assert!(self.vehicles.iter().all(|v| v.x.abs() <= cfg.rsu_radius));

        // road graph
        let use_gnn = self.training() && self.scheme == Scheme::Fgnn;
        let graph_now = if use_gnn {
            let gv: Vec<GraphVehicle> = self
                .vehicles
                .iter()
                .map(|v| GraphVehicle {
                    lane: v.lane,
                    position: v.position(),
                    local_agg_count: v.local_agg_count,
                    losses: v.last_losses,
                })
                .collect();
            let g = Arc::new(RoadGraph::build(&gv, &cfg)?);
            let emb = self.gnn.embed(&g)?;
            Some((g, emb))
        } else {
            None
        };

        // observe and act
        let pre_aoi = aoi::system_average_aoi(
            &self
                .vehicles
                .iter()
                .map(|v| v.queue.average_aoi())
                .collect::<Vec<_>>(),
        );
        let n_now = self.vehicles.len();
        let gains: Vec<f64> = self.vehicles.iter().map(|v| v.channel.gain(rsu)).collect();
        let mut states = Vec::with_capacity(n_now);
        for (v, &gain) in self.vehicles.iter_mut().zip(&gains) {
            let head = v.queue.head();
            let obs = Observation {
                gain,
                head_aoi: head.map_or(0.0, |t| t.aoi),
                system_aoi: pre_aoi,
                distance: crate::channel::distance(v.position(), rsu),
                head_size: head.map_or(0.0, |t| t.size),
                n_vehicles: n_now,
            };
            let s = sac::build_state(&obs, &cfg);
            if let Some(p) = v.pending.take() {
                v.replay.push(Transition {
                    state: p.state,
                    action: p.action,
                    reward: p.reward,
                    next_state: s,
                });
            }
            states.push(s);
        }
        if self.scheme == Scheme::Gdbr {
            let heads: Vec<Option<f64>> = self
                .vehicles
                .iter()
                .map(|v| v.queue.head().map(|t| t.aoi))
                .collect();
            let prev: Vec<f64> = self.vehicles.iter().map(|v| v.offload_prob).collect();
            let q = baselines::gdbr_step(&heads, &prev, pre_aoi, &cfg);
            for (v, q) in self.vehicles.iter_mut().zip(q) {
                v.offload_prob = q;
                v.power = q * cfg.p_max;
            }
        } else {
            let explore = self.stage == Stage::Train;
            for (v, s) in self.vehicles.iter_mut().zip(&states) {
                v.power = v
                    .sac
                    .select_action(s, &mut self.policy_rng, explore, cfg.p_max);
            }
        }

        // rates and queues
        let powers: Vec<f64> = self.vehicles.iter().map(|v| v.power).collect();
        let up_p: Vec<f64> = uploads.iter().map(|u| u.power).collect();
        let up_g: Vec<f64> = uploads.iter().map(|u| u.gain).collect();
        let rates = compute_rates(&powers, &gains, &up_p, &up_g, cfg.bandwidth, cfg.noise);
        let mut delivered_bits = 0.0;
        let heads: Vec<(f64, usize)> = self
            .vehicles
            .iter()
            .map(|v| (v.queue.head().map_or(0.0, |t| t.aoi), v.queue.len()))
            .collect();
        for (v, &r) in self.vehicles.iter_mut().zip(&rates) {
            let st = v.queue.step(r, cfg.slot);
            delivered_bits += st.delivered_bits;
            self.counters.delivered_tasks += st.delivered_tasks as u64;
        }
        let sys_aoi = aoi::system_average_aoi(
            &self
                .vehicles
                .iter()
                .map(|v| v.queue.average_aoi())
                .collect::<Vec<_>>(),
        );
        let xi = self.penalty.step(&departed_aoi, n_c, cfg.penalty_decay);

        // rewards and transitions
        let mut reward_sum = 0.0;
        for (i, v) in self.vehicles.iter_mut().enumerate() {
            let (head_aoi, count) = heads[i];
            let r = aoi::reward(sys_aoi, head_aoi, v.power, count, xi, &cfg);
            reward_sum += r;
            if self.stage == Stage::Train && self.scheme.learns() {
                v.pending = Some(PendingTransition {
                    state: states[i],
                    action: v.power,
                    reward: r,
                });
            }
        }

        if self.training() {
            self.learn(&cfg, graph_now.as_ref())?;
        }
        if let Some((g, emb)) = graph_now {
            if let Some((pg, pe, pa)) = self.gnn_pending.take() {
                self.gnn_buffer.push(GnnTransition {
                    graph: pg,
                    embeddings: pe,
                    system_aoi: pa,
                    next: g.clone(),
                });
            }
            self.gnn_pending = Some((g, emb, sys_aoi));
            if (self.slot + 1).is_multiple_of(cfg.gnn_train_period as u64)
                && self
                    .gnn
                    .train(&self.gnn_buffer, &cfg, &mut self.learn_rng)?
                    .is_some()
            {
                self.counters.gnn_rounds += 1;
            }
        }

        let n = self.vehicles.len();
        let record = MetricsRecord {
            slot: self.slot,
            avg_aoi: sys_aoi,
            avg_power: if n == 0 {
                0.0
            } else {
                powers.iter().sum::<f64>() / n as f64
            },
            delivered_bits,
            n_vehicles: n,
            mean_reward: if n == 0 { 0.0 } else { reward_sum / n as f64 },
        };
        self.slot += 1;
        Ok(record)
    }

    /// Local training, then the scheme's model exchange for vehicles that trained.
    fn learn(
        &mut self,
        cfg: &ScenarioConfig,
        graph_now: Option<&(Arc<RoadGraph>, Vec<f64>)>,
    ) -> Result<()> {
        if !(self.slot + 1).is_multiple_of(cfg.local_train_period as u64) {
            return Ok(());
        }
        let mut trained = Vec::new();
        for (i, v) in self.vehicles.iter_mut().enumerate() {
            if let Some(stats) =
                v.sac
                    .local_train(&v.replay, v.iterations, cfg, &mut self.learn_rng)?
            {
                v.last_losses = stats.losses;
                trained.push(i);
                self.counters.local_train_rounds += 1;
            }
        }
        if trained.is_empty() {
            return Ok(());
        }
        match self.scheme {
            Scheme::Gfsac => {
                let rsu = self.rsu();
                let bits = self.store.payload_bits();
                for &i in &trained {
                    let v = &mut self.vehicles[i];
                    baselines::gfsac_on_train_complete(&mut self.store, &mut v.sac)?;
                    let gain = v.channel.gain(rsu);
                    self.carried_uploads.push(UploadEvent {
                        vehicle: v.id,
                        payload_bits: bits,
                        power: federated::model_upload_power(gain, bits, cfg),
                        gain,
                        slot: self.slot,
                    });
                }
            }
            Scheme::Fgnn | Scheme::Lfsac => {
                let positions: Vec<(f64, f64)> =
                    self.vehicles.iter().map(|v| v.position()).collect();
                let critics: Vec<(crate::nn::ParamVector, crate::nn::ParamVector)> = self
                    .vehicles
                    .iter()
                    .map(|v| (v.sac.critic1.params.clone(), v.sac.critic2.params.clone()))
                    .collect();
                for &i in &trained {
                    let nbrs = graph::in_range(&positions, i, cfg.v2v_range);
                    let weights: Vec<(usize, f64)> = match (self.scheme, graph_now) {
                        (Scheme::Fgnn, Some((g, emb))) => {
                            graph::aggregation_weights(emb, g, i, &nbrs)
                        }
                        _ => {
                            let members: Vec<usize> =
                                std::iter::once(i).chain(nbrs.iter().copied()).collect();
                            let w = federated::uniform_weights(members.len());
                            members.into_iter().zip(w).collect()
                        }
                    };
                    let parts: Vec<(CriticPair<'_>, f64)> = weights
                        .iter()
                        .map(|&(j, w)| {
                            (
                                CriticPair {
                                    critic1: &critics[j].0,
                                    critic2: &critics[j].1,
                                },
                                w,
                            )
                        })
                        .collect();
                    let combined = federated::combine_critics(&parts)?;
                    let v = &mut self.vehicles[i];
                    federated::apply_local_aggregate(&mut v.sac, combined, &mut v.local_agg_count);
                    self.counters.local_aggregations += 1;
                    if self.audit.enabled {
                        let ids: Vec<(u64, f64)> = weights
                            .iter()
                            .map(|&(j, w)| (self.vehicles[j].id, w))
                            .collect();
                        self.audit.local(self.slot, &ids);
                    }
                }
            }
            Scheme::Gdbr => {}
        }
        Ok(())
    }
}

/// Per-run time averages.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub config_hash: String,
    pub seed: u64,
    pub scheme: Scheme,
    pub stage: Stage,
    pub slots: u64,
    pub avg_aoi: f64,
    pub avg_power: f64,
    pub avg_delivered_bits: f64,
    /// Delivered bits per second of simulated time.
    pub throughput: f64,
    pub avg_vehicles: f64,
    pub avg_reward: f64,
    pub wall_seconds: f64,
    pub counters: Counters,
    pub store_version: u64,
}

impl RunSummary {
    pub fn from_records(
        records: &[MetricsRecord],
        cfg: &ScenarioConfig,
        seed: u64,
        scheme: Scheme,
        stage: Stage,
        wall_seconds: f64,
        sim: &Simulation,
    ) -> Self {
        let n = records.len().max(1) as f64;
        let mean = |f: fn(&MetricsRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
        let avg_delivered_bits = mean(|r| r.delivered_bits);
        Self {
            config_hash: cfg.hash_hex(),
            seed,
            scheme,
            stage,
            slots: records.len() as u64,
            avg_aoi: mean(|r| r.avg_aoi),
            avg_power: mean(|r| r.avg_power),
            avg_delivered_bits,
            throughput: avg_delivered_bits / cfg.slot,
            avg_vehicles: mean(|r| r.n_vehicles as f64),
            avg_reward: mean(|r| r.mean_reward),
            wall_seconds,
            counters: sim.counters,
            store_version: sim.store.version,
        }
    }
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub store: GlobalModelStore,
    pub gnn: GnnModel,
    pub summary: RunSummary,
    pub records: Vec<MetricsRecord>,
}

pub fn run_training(cfg: &ScenarioConfig, scheme: Scheme, seed: u64) -> Result<TrainOutcome> {
    let start = std::time::Instant::now();
    let mut sim = Simulation::new_training(cfg, scheme, seed)?;
    let records = sim.run(cfg.train_slots as u64)?;
    let summary = RunSummary::from_records(
        &records,
        cfg,
        seed,
        scheme,
        Stage::Train,
        start.elapsed().as_secs_f64(),
        &sim,
    );
    Ok(TrainOutcome {
        store: sim.store,
        gnn: sim.gnn,
        summary,
        records,
    })
}

pub fn run_test(
    cfg: &ScenarioConfig,
    scheme: Scheme,
    seed: u64,
    store: &GlobalModelStore,
) -> Result<(RunSummary, Vec<MetricsRecord>)> {
    let start = std::time::Instant::now();
    let mut sim = Simulation::new_test(cfg, scheme, seed, store.clone())?;
    let records = sim.run(cfg.test_slots as u64)?;
    let summary = RunSummary::from_records(
        &records,
        cfg,
        seed,
        scheme,
        Stage::Test,
        start.elapsed().as_secs_f64(),
        &sim,
    );
    Ok((summary, records))
}

/// Mean of `avg_aoi` over the first and the last quarter of `records`.
pub fn quarter_aoi(records: &[MetricsRecord]) -> (f64, f64) {
    let q = records.len() / 4;
    if q == 0 {
        return (0.0, 0.0);
    }
    let mean = |rs: &[MetricsRecord]| rs.iter().map(|r| r.avg_aoi).sum::<f64>() / rs.len() as f64;
    (mean(&records[..q]), mean(&records[records.len() - q..]))
}
