//! Road-segment graph, message-passing GNN and aggregation weights.
//!
//! Every lane is cut into `2 D_r / L_g` fixed segments; each segment is a
//! node. A node carries five features: the number of vehicles on it, their
//! mean local-aggregation count and their mean actor, critic and
//! target-critic losses. Two nodes are joined when some pair of vehicles on
//! them is within V2V range.

mod gnn;

pub use gnn::{
    aggregation_weights, critic_features, gnn_backward, gnn_forward, gnn_loss, gnn_loss_grad,
    GnnCache, GnnLosses, GnnModel, GnnTransition, GraphBatch, GNN_CRITIC_INPUT,
};

use std::fmt::Write as _;

use ndarray::Array2;

use crate::channel::distance;
use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::sac::Losses;

pub const NODE_FEATURES: usize = 5;

/// What the graph needs to know about one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphVehicle {
    pub lane: usize,
    pub position: (f64, f64),
    pub local_agg_count: usize,
    pub losses: Losses,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadGraph {
    /// `nodes x 5` feature matrix.
    pub features: Array2<f64>,
    /// Sorted neighbor lists; symmetric, no self loops.
    pub neighbors: Vec<Vec<usize>>,
    /// Node of each input vehicle.
    pub vehicle_nodes: Vec<usize>,
}

/// Segment index of longitudinal position `x` on a lane of `segments` segments.
pub fn segment_of(x: f64, cfg: &ScenarioConfig, segments: usize) -> usize {
    let s = ((x + cfg.rsu_radius) / cfg.segment_len).floor();
    (s.max(0.0) as usize).min(segments - 1)
}

/// Indices of vehicles other than `i` within `range` of vehicle `i`.
pub fn in_range(positions: &[(f64, f64)], i: usize, range: f64) -> Vec<usize> {
    (0..positions.len())
        .filter(|&j| j != i && distance(positions[i], positions[j]) <= range)
        .collect()
}

impl RoadGraph {
    pub fn build(vehicles: &[GraphVehicle], cfg: &ScenarioConfig) -> Result<Self> {
        let segments = cfg.segments_per_lane()?;
        let n = segments * cfg.lanes;
        let mut sums = Array2::<f64>::zeros((n, NODE_FEATURES));
        let vehicle_nodes: Vec<usize> = vehicles
            .iter()
            .map(|v| v.lane * segments + segment_of(v.position.0, cfg, segments))
            .collect();
        for (v, &node) in vehicles.iter().zip(&vehicle_nodes) {
            sums[[node, 0]] += 1.0;
            sums[[node, 1]] += v.local_agg_count as f64;
            sums[[node, 2]] += v.losses.actor;
            sums[[node, 3]] += v.losses.critic;
            sums[[node, 4]] += v.losses.target_critic;
        }
        for mut row in sums.rows_mut() {
            let count = row[0];
            if count > 0.0 {
                for k in 1..NODE_FEATURES {
                    row[k] /= count;
                }
            }
        }
        let mut neighbors = vec![Vec::new(); n];
        for i in 0..vehicles.len() {
            for j in i + 1..vehicles.len() {
                let (a, b) = (vehicle_nodes[i], vehicle_nodes[j]);
                if a != b && distance(vehicles[i].position, vehicles[j].position) <= cfg.v2v_range {
                    neighbors[a].push(b);
                    neighbors[b].push(a);
                }
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self {
            features: sums,
            neighbors,
            vehicle_nodes,
        })
    }

    pub fn node_count(&self) -> usize {
        self.features.nrows()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Dense 0/1 adjacency matrix.
    pub fn adjacency(&self) -> Array2<f64> {
        let n = self.node_count();
        let mut a = Array2::zeros((n, n));
        for (i, list) in self.neighbors.iter().enumerate() {
            for &j in list {
                a[[i, j]] = 1.0;
            }
        }
        a
    }

    /// Text dump: a `graph <nodes> <edges>` header, one `node` line per node
    /// with its five features, then one `edge i j` line per edge with `i < j`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "graph {} {}", self.node_count(), self.edge_count());
        for (i, row) in self.features.rows().into_iter().enumerate() {
            let _ = write!(out, "node {i}");
            for v in row {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        for (i, list) in self.neighbors.iter().enumerate() {
            for &j in list.iter().filter(|&&j| j > i) {
                let _ = writeln!(out, "edge {i} {j}");
            }
        }
        out
    }
}
