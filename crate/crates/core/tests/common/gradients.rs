//! Analytic gradients against central finite differences (step 1e-5) on the
//! network shapes the simulator uses, with sampling noise frozen. Each check
//! returns the largest relative error over ten seeds.

use super::{fd_gradient, max_rel_error};
use ndarray::Array2;
use vec_offload::config::ScenarioConfig;
use vec_offload::graph::{self, GnnModel, GraphBatch, GraphVehicle, RoadGraph, GNN_CRITIC_INPUT};
use vec_offload::nn::{Activation, Mlp};
use vec_offload::rng::RngStream;
use vec_offload::sac::{self, Losses, SacModel, STATE_DIM};

pub const STEP: f64 = 1e-5;
pub const TOL: f64 = 1e-4;
/// Magnitude below which errors are measured absolutely.
pub const FLOOR: f64 = 1e-6;
pub const SEEDS: std::ops::Range<u64> = 0..10;

fn random_states(rng: &mut RngStream, n: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, STATE_DIM), || rng.uniform_range(-1.0, 1.0))
}

pub fn critic_gradient() -> f64 {
    let mut worst = 0.0f64;
    let cfg = ScenarioConfig::desk_scale();
    for seed in SEEDS {
        let mut rng = RngStream::new(seed);
        let m = SacModel::new(&cfg, &mut rng);
        let states = random_states(&mut rng, 8);
        let actions: Vec<f64> = (0..8).map(|_| rng.uniform_range(0.0, cfg.p_max)).collect();
        let targets: Vec<f64> = (0..8).map(|_| rng.normal()).collect();
        let x = sac::critic_input(states.view(), &actions, cfg.p_max);
        let (_, g) = sac::critic_loss_grad(&m.critic1, x.view(), &targets).unwrap();
        let num = fd_gradient(&m.critic1.params, STEP, |p| {
            let net = Mlp::from_params(p.clone(), Activation::Relu);
            sac::critic_loss_grad(&net, x.view(), &targets).unwrap().0
        });
        let err = max_rel_error(&g.flatten(), &num, FLOOR);
        worst = worst.max(err);
    }
    worst
}

pub fn actor_gradient() -> f64 {
    let mut worst = 0.0f64;
    let cfg = ScenarioConfig::desk_scale();
    for seed in SEEDS {
        let mut rng = RngStream::new(100 + seed);
        let m = SacModel::new(&cfg, &mut rng);
        let states = random_states(&mut rng, 8);
        let noise: Vec<f64> = (0..8).map(|_| rng.normal()).collect();
        let beta = 0.2 + rng.uniform();
        let eval = sac::actor_loss_grad(
            &m.actor,
            &m.critic1,
            &m.critic2,
            beta,
            states.view(),
            &noise,
            cfg.p_max,
        )
        .unwrap();
        let num = fd_gradient(&m.actor.params, STEP, |p| {
            let actor = Mlp::from_params(p.clone(), Activation::Relu);
            sac::actor_loss_grad(
                &actor,
                &m.critic1,
                &m.critic2,
                beta,
                states.view(),
                &noise,
                cfg.p_max,
            )
            .unwrap()
            .loss
        });
        let err = max_rel_error(&eval.grad.flatten(), &num, FLOOR);
        worst = worst.max(err);
    }
    worst
}

/// The temperature objective is `log_beta * mean(-log pi - target_entropy)`
/// with log-probabilities from the actor under frozen noise.
pub fn temperature_gradient() -> f64 {
    let cfg = ScenarioConfig::desk_scale();
    let mut worst = 0.0f64;
    for seed in SEEDS {
        let mut rng = RngStream::new(200 + seed);
        let m = SacModel::new(&cfg, &mut rng);
        let states = random_states(&mut rng, 16);
        let noise: Vec<f64> = (0..16).map(|_| rng.normal()).collect();
        let log_probs = m.log_probs(states.view(), &noise, cfg.p_max).unwrap();
        let h = cfg.target_entropy;
        let objective =
            |lb: f64| lb * log_probs.iter().map(|lp| -lp - h).sum::<f64>() / log_probs.len() as f64;
        let lb = m.log_temperature + rng.uniform_range(-1.0, 1.0);
        let numeric = (objective(lb + STEP) - objective(lb - STEP)) / (2.0 * STEP);
        let analytic = sac::temperature_grad(&log_probs, h);
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR);
        worst = worst.max(err);
    }
    worst
}

fn random_graphs(cfg: &ScenarioConfig, rng: &mut RngStream, count: usize) -> Vec<RoadGraph> {
    (0..count)
        .map(|_| {
            let n = 3 + rng.index(8);
            let vehicles: Vec<GraphVehicle> = (0..n)
                .map(|_| {
                    let lane = rng.index(cfg.lanes);
                    GraphVehicle {
                        lane,
                        position: (
                            rng.uniform_range(-cfg.rsu_radius, cfg.rsu_radius),
                            cfg.lane_y(lane),
                        ),
                        local_agg_count: rng.index(20),
                        losses: Losses {
                            actor: rng.normal(),
                            critic: rng.uniform() * 5.0,
                            target_critic: rng.uniform() * 5.0,
                        },
                    }
                })
                .collect();
            RoadGraph::build(&vehicles, cfg).unwrap()
        })
        .collect()
}

pub fn gnn_gradient() -> f64 {
    let mut worst = 0.0f64;
    let cfg = ScenarioConfig::desk_scale();
    for seed in SEEDS {
        let mut rng = RngStream::new(300 + seed);
        let model = GnnModel::new(&cfg, &mut rng);
        let graphs = random_graphs(&cfg, &mut rng, 3);
        let refs: Vec<&RoadGraph> = graphs.iter().collect();
        let batch = GraphBatch::new(&refs);
        let (_, g) = graph::gnn_loss_grad(&model.gnn, &model.critic, &batch).unwrap();
        let num = fd_gradient(&model.gnn, STEP, |p| {
            graph::gnn_loss(p, &model.critic, &batch).unwrap()
        });
        let err = max_rel_error(&g.flatten(), &num, FLOOR);
        worst = worst.max(err);
    }
    worst
}

pub fn gnn_critic_gradient() -> f64 {
    let mut worst = 0.0f64;
    let cfg = ScenarioConfig::desk_scale();
    for seed in SEEDS {
        let mut rng = RngStream::new(400 + seed);
        let model = GnnModel::new(&cfg, &mut rng);
        let graphs = random_graphs(&cfg, &mut rng, 6);
        let refs: Vec<&RoadGraph> = graphs.iter().collect();
        let batch = GraphBatch::new(&refs);
        let emb: Vec<f64> = graphs
            .iter()
            .flat_map(|g| model.embed(g).unwrap())
            .collect();
        let x = graph::critic_features(&batch, &emb);
        assert_eq!(x.ncols(), GNN_CRITIC_INPUT);
        let targets: Vec<f64> = (0..graphs.len()).map(|_| -rng.uniform() * 3.0).collect();
        let (_, g) = model.critic.mse_loss_grad(x.view(), &targets).unwrap();
        let num = fd_gradient(&model.critic.params, STEP, |p| {
            Mlp::from_params(p.clone(), Activation::Relu)
                .mse_loss_grad(x.view(), &targets)
                .unwrap()
                .0
        });
        let err = max_rel_error(&g.flatten(), &num, FLOOR);
        worst = worst.max(err);
    }
    worst
}
