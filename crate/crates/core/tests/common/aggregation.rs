//! Randomized local-aggregation events through the real pipeline: road graph,
//! GNN embeddings, softmax weights and critic combination.

use vec_offload::config::ScenarioConfig;
use vec_offload::federated::{self, CriticPair};
use vec_offload::graph::{self, GnnModel, GraphVehicle, RoadGraph};
use vec_offload::nn::ParamVector;
use vec_offload::rng::RngStream;
use vec_offload::sac::{Losses, SacModel};

#[derive(Debug, Clone, Copy, Default)]
pub struct Violations {
    pub events: usize,
    pub simplex: usize,
    pub convexity: usize,
    pub idempotence: usize,
}

impl Violations {
    pub fn total(&self) -> usize {
        self.simplex + self.convexity + self.idempotence
    }
}

const SIMPLEX_TOL: f64 = 1e-12;

fn within_hull(out: &ParamVector, parts: &[&ParamVector]) -> bool {
    let flat: Vec<Vec<f64>> = parts.iter().map(|p| p.flatten()).collect();
    out.flatten().iter().enumerate().all(|(i, &v)| {
        let lo = flat.iter().map(|f| f[i]).fold(f64::INFINITY, f64::min);
        let hi = flat.iter().map(|f| f[i]).fold(f64::NEG_INFINITY, f64::max);
        let slack = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
        v >= lo - slack && v <= hi + slack
    })
}

/// Runs `events` aggregation events, drawing a fresh road and model
/// population every 100 events.
pub fn run(events: usize, seed: u64) -> Violations {
    let cfg = ScenarioConfig {
        hidden_width: 16,
        gnn_hidden: vec![16, 8],
        gnn_critic_width: 16,
        ..ScenarioConfig::desk_scale()
    };
    let mut rng = RngStream::new(seed);
    let mut v = Violations::default();
    while v.events < events {
        let gnn = GnnModel::new(&cfg, &mut rng);
        let n = 2 + rng.index(14);
        let cars: Vec<GraphVehicle> = (0..n)
            .map(|_| {
                let lane = rng.index(cfg.lanes);
                GraphVehicle {
                    lane,
                    position: (
                        rng.uniform_range(-cfg.rsu_radius, cfg.rsu_radius),
                        cfg.lane_y(lane),
                    ),
                    local_agg_count: rng.index(50),
                    losses: Losses {
                        actor: rng.normal() * 3.0,
                        critic: rng.uniform() * 10.0,
                        target_critic: rng.uniform() * 10.0,
                    },
                }
            })
            .collect();
        let road = RoadGraph::build(&cars, &cfg).unwrap();
        let emb = gnn.embed(&road).unwrap();
        let models: Vec<SacModel> = (0..n).map(|_| SacModel::new(&cfg, &mut rng)).collect();
        let positions: Vec<(f64, f64)> = cars.iter().map(|c| c.position).collect();
        for _ in 0..100.min(events - v.events) {
            v.events += 1;
            let me = rng.index(n);
            let near = graph::in_range(&positions, me, cfg.v2v_range);
            let weights = graph::aggregation_weights(&emb, &road, me, &near);
            let sum: f64 = weights.iter().map(|w| w.1).sum();
            if weights.iter().any(|w| !(w.1 >= 0.0 && w.1 <= 1.0))
                || (sum - 1.0).abs() > SIMPLEX_TOL
            {
                v.simplex += 1;
            }
            let parts: Vec<(CriticPair, f64)> = weights
                .iter()
                .map(|&(j, w)| (CriticPair::of(&models[j]), w))
                .collect();
            let Ok((c1, c2)) = federated::combine_critics(&parts) else {
                v.simplex += 1;
                continue;
            };
            let p1: Vec<&ParamVector> = weights
                .iter()
                .map(|&(j, _)| &models[j].critic1.params)
                .collect();
            let p2: Vec<&ParamVector> = weights
                .iter()
                .map(|&(j, _)| &models[j].critic2.params)
                .collect();
            if !within_hull(&c1, &p1) || !within_hull(&c2, &p2) {
                v.convexity += 1;
            }
            // identical participants must come back unchanged
            let same: Vec<(CriticPair, f64)> = weights
                .iter()
                .map(|&(_, w)| (CriticPair::of(&models[me]), w))
                .collect();
            let (s1, s2) = federated::combine_critics(&same).unwrap();
            let own = &models[me];
            let tol = 1e-12 * own.critic1.params.l2_norm().max(1.0);
            if s1.max_abs_diff(&own.critic1.params) > tol
                || s2.max_abs_diff(&own.critic2.params) > tol
            {
                v.idempotence += 1;
            }
        }
    }
    v
}
