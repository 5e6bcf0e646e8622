use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Axis};

use super::{RoadGraph, NODE_FEATURES};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::nn::{Activation, AdamState, Layer, Mlp, ParamVector};
use crate::rng::RngStream;
use crate::sac::ReplayBuffer;

/// GNN critic input: mean node embedding followed by the mean input features.
pub const GNN_CRITIC_INPUT: usize = 1 + NODE_FEATURES;

fn symlog(x: f64) -> f64 {
    x.signum() * x.abs().ln_1p()
}

/// Graphs stacked block-diagonally for batched message passing. Node
/// features are compressed with `sign(x) ln(1 + |x|)` on the way in.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    features: Array2<f64>,
    neighbors: Vec<Vec<usize>>,
    inv_deg: Vec<f64>,
    ranges: Vec<(usize, usize)>,
}

impl GraphBatch {
    pub fn new(graphs: &[&RoadGraph]) -> Self {
        let total: usize = graphs.iter().map(|g| g.node_count()).sum();
        let mut features = Array2::zeros((total, NODE_FEATURES));
        let mut neighbors = Vec::with_capacity(total);
        let mut inv_deg = Vec::with_capacity(total);
        let mut ranges = Vec::with_capacity(graphs.len());
        let mut offset = 0;
        for g in graphs {
            let n = g.node_count();
            features
                .slice_mut(ndarray::s![offset..offset + n, ..])
                .assign(&g.features.mapv(symlog));
            for list in &g.neighbors {
                inv_deg.push(if list.is_empty() {
                    0.0
                } else {
                    1.0 / list.len() as f64
                });
                neighbors.push(list.iter().map(|&j| j + offset).collect());
            }
            ranges.push((offset, n));
            offset += n;
        }
        Self {
            features,
            neighbors,
            inv_deg,
            ranges,
        }
    }

    pub fn single(graph: &RoadGraph) -> Self {
        Self::new(&[graph])
    }

    pub fn total_nodes(&self) -> usize {
        self.features.nrows()
    }

    pub fn graph_count(&self) -> usize {
        self.ranges.len()
    }

    /// `Z = (I + D^-1 A) U`.
    fn propagate(&self, u: &Array2<f64>) -> Array2<f64> {
        let mut z = u.clone();
        for (i, list) in self.neighbors.iter().enumerate() {
            if list.is_empty() {
                continue;
            }
            let w = self.inv_deg[i];
            for &j in list {
                for k in 0..u.ncols() {
                    z[[i, k]] += w * u[[j, k]];
                }
            }
        }
        z
    }

    /// `dU = (I + D^-1 A)^T dZ`.
    fn propagate_transpose(&self, dz: &Array2<f64>) -> Array2<f64> {
        let mut du = dz.clone();
        for (i, list) in self.neighbors.iter().enumerate() {
            let w = self.inv_deg[i];
            for &j in list {
                for k in 0..dz.ncols() {
                    du[[j, k]] += w * dz[[i, k]];
                }
            }
        }
        du
    }
}

/// Saved activations of a GNN forward pass.
#[derive(Debug, Clone)]
pub struct GnnCache {
    inputs: Vec<Array2<f64>>,
}

fn check_gnn(params: &ParamVector) -> Result<()> {
    if params.layers.first().map(|l| l.in_dim()) != Some(NODE_FEATURES)
        || params.layers.last().map(|l| l.out_dim()) != Some(1)
    {
        return Err(Error::Shape(format!(
            "GNN must map {NODE_FEATURES} node features to one embedding"
        )));
    }
    Ok(())
}

/// Message passing: per layer `Z = (I + D^-1 A)(H W^T + b)`, tanh on hidden
/// layers, identity on the scalar output. Returns one embedding per node.
pub fn gnn_forward(params: &ParamVector, batch: &GraphBatch) -> Result<(Array2<f64>, GnnCache)> {
    check_gnn(params)?;
    let n = params.layers.len();
    let mut inputs = Vec::with_capacity(n);
    let mut h = batch.features.clone();
    for (i, layer) in params.layers.iter().enumerate() {
        let mut u = h.dot(&layer.weight.t());
        u += &layer.bias;
        let mut z = batch.propagate(&u);
        inputs.push(h);
        if i + 1 < n {
            z.mapv_inplace(f64::tanh);
        }
        h = z;
    }
    Ok((h, GnnCache { inputs }))
}

/// Parameter gradient given `dL/d embeddings`.
pub fn gnn_backward(
    params: &ParamVector,
    batch: &GraphBatch,
    cache: &GnnCache,
    grad_out: ArrayView2<f64>,
) -> Result<ParamVector> {
    let n = params.layers.len();
    if cache.inputs.len() != n || grad_out.nrows() != batch.total_nodes() || grad_out.ncols() != 1 {
        return Err(Error::Shape(
            "GNN cache or gradient does not match the batch".into(),
        ));
    }
    let mut grads = params.zeros_like();
    let mut dz = grad_out.to_owned();
    for i in (0..n).rev() {
        let layer = &params.layers[i];
        let du = batch.propagate_transpose(&dz);
        let h = &cache.inputs[i];
        grads.layers[i].weight = du.t().dot(h);
        grads.layers[i].bias = du.sum_axis(Axis(0));
        if i == 0 {
            break;
        }
        let mut dh = du.dot(&layer.weight);
        ndarray::Zip::from(&mut dh)
            .and(h)
            .for_each(|g, &post| *g *= 1.0 - post * post);
        dz = dh;
    }
    Ok(grads)
}

/// Critic input rows, one per graph: mean embedding and mean node features.
pub fn critic_features(batch: &GraphBatch, embeddings: &[f64]) -> Array2<f64> {
    let mut x = Array2::zeros((batch.graph_count(), GNN_CRITIC_INPUT));
    for (g, &(start, len)) in batch.ranges.iter().enumerate() {
        if len == 0 {
            continue;
        }
        let inv = 1.0 / len as f64;
        x[[g, 0]] = embeddings[start..start + len].iter().sum::<f64>() * inv;
        for k in 0..NODE_FEATURES {
            let s: f64 = (start..start + len).map(|r| batch.features[[r, k]]).sum();
            x[[g, 1 + k]] = s * inv;
        }
    }
    x
}

/// GNN objective `-mean Q(G, gnn(G))` over the batch and its gradient with
/// respect to the GNN parameters (critic held fixed).
/// `-mean Q` over the batch's graphs, forward pass only.
pub fn gnn_loss(params: &ParamVector, critic: &Mlp, batch: &GraphBatch) -> Result<f64> {
    let (emb, _) = gnn_forward(params, batch)?;
    let x = critic_features(batch, emb.column(0).as_slice().expect("contiguous column"));
    let (q, _) = critic.forward(x.view())?;
    Ok(-q.sum() / batch.graph_count() as f64)
}

pub fn gnn_loss_grad(
    params: &ParamVector,
    critic: &Mlp,
    batch: &GraphBatch,
) -> Result<(f64, ParamVector)> {
    let (emb, cache) = gnn_forward(params, batch)?;
    let x = critic_features(batch, emb.column(0).as_slice().expect("contiguous column"));
    let (q, ccache) = critic.forward(x.view())?;
    let b = batch.graph_count() as f64;
    let loss = -q.sum() / b;
    let gq = Array2::from_elem((batch.graph_count(), 1), -1.0 / b);
    let (_, dx) = critic.backward(&ccache, gq.view())?;
    let mut d_emb = Array2::zeros((batch.total_nodes(), 1));
    for (g, &(start, len)) in batch.ranges.iter().enumerate() {
        let share = dx[[g, 0]] / len.max(1) as f64;
        for r in start..start + len {
            d_emb[[r, 0]] = share;
        }
    }
    let grad = gnn_backward(params, batch, &cache, d_emb.view())?;
    Ok((loss, grad))
}

/// Softmax weights over the embeddings of `vehicle`'s node and the nodes of
/// each vehicle in `in_range`. The first entry is the vehicle itself.
pub fn aggregation_weights(
    embeddings: &[f64],
    graph: &RoadGraph,
    vehicle: usize,
    in_range: &[usize],
) -> Vec<(usize, f64)> {
    let members: Vec<usize> = std::iter::once(vehicle)
        .chain(in_range.iter().copied())
        .collect();
    let logits: Vec<f64> = members
        .iter()
        .map(|&v| embeddings[graph.vehicle_nodes[v]])
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    members
        .into_iter()
        .zip(exps)
        .map(|(v, e)| (v, e / total))
        .collect()
}

/// One stored step of the road graph.
#[derive(Debug, Clone)]
pub struct GnnTransition {
    pub graph: Arc<RoadGraph>,
    pub embeddings: Vec<f64>,
    pub system_aoi: f64,
    pub next: Arc<RoadGraph>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GnnLosses {
    pub critic: f64,
    /// `-mean Q` of the GNN's own embeddings.
    pub gnn: f64,
    pub iterations: usize,
}

/// RSU-side GNN with its critic and target critic.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    pub gnn: ParamVector,
    pub critic: Mlp,
    pub target_critic: Mlp,
    pub gnn_opt: AdamState,
    pub critic_opt: AdamState,
    pub updates: u64,
}

impl GnnModel {
    pub fn new(cfg: &ScenarioConfig, rng: &mut RngStream) -> Self {
        let mut dims = vec![NODE_FEATURES];
        dims.extend(&cfg.gnn_hidden);
        dims.push(1);
        let gnn = ParamVector::new(
            dims.windows(2)
                .map(|w| Layer::uniform(w[1], w[0], rng))
                .collect(),
        );
        let w = cfg.gnn_critic_width;
        let critic = Mlp::new(&[GNN_CRITIC_INPUT, w, w, 1], Activation::Relu, rng);
        Self {
            gnn_opt: AdamState::for_params(&gnn, cfg.lr_gnn),
            critic_opt: AdamState::for_params(&critic.params, cfg.lr_gnn_critic),
            target_critic: critic.clone(),
            gnn,
            critic,
            updates: 0,
        }
    }

    /// One embedding per node of `graph`.
    pub fn embed(&self, graph: &RoadGraph) -> Result<Vec<f64>> {
        let (emb, _) = gnn_forward(&self.gnn, &GraphBatch::single(graph))?;
        Ok(emb.into_raw_vec_and_offset().0)
    }

    /// TD targets `-aoi + discount * Q_target(G', gnn(G'))`.
    pub fn critic_targets(
        &self,
        next: &GraphBatch,
        system_aoi: &[f64],
        discount: f64,
    ) -> Result<Vec<f64>> {
        let (emb, _) = gnn_forward(&self.gnn, next)?;
        let x = critic_features(next, emb.column(0).as_slice().expect("contiguous column"));
        let q = self.target_critic.predict(x.view())?;
        Ok(system_aoi
            .iter()
            .enumerate()
            .map(|(i, a)| -a + discount * q[[i, 0]])
            .collect())
    }

    /// Critic step on the TD error, then a GNN step raising the critic's value.
    pub fn train_iteration(
        &mut self,
        items: &[GnnTransition],
        cfg: &ScenarioConfig,
    ) -> Result<GnnLosses> {
        let graphs: Vec<&RoadGraph> = items.iter().map(|t| t.graph.as_ref()).collect();
        let nexts: Vec<&RoadGraph> = items.iter().map(|t| t.next.as_ref()).collect();
        let batch = GraphBatch::new(&graphs);
        let next = GraphBatch::new(&nexts);
        let aoi: Vec<f64> = items.iter().map(|t| t.system_aoi).collect();
        let targets = self.critic_targets(&next, &aoi, cfg.discount)?;
        let stored: Vec<f64> = items
            .iter()
            .flat_map(|t| t.embeddings.iter().copied())
            .collect();
        let x = critic_features(&batch, &stored);
        let (critic_loss, cg) = self.critic.mse_loss_grad(x.view(), &targets)?;
        self.critic_opt.step(&mut self.critic.params, &cg);
        let (gnn_loss, gg) = gnn_loss_grad(&self.gnn, &self.critic, &batch)?;
        self.gnn_opt.step(&mut self.gnn, &gg);
        self.updates += 1;
        Ok(GnnLosses {
            critic: critic_loss,
            gnn: gnn_loss,
            iterations: 1,
        })
    }

    /// `gnn_iterations` training iterations once the buffer holds
    /// `gnn_warmup` transitions; `None` otherwise.
    pub fn train(
        &mut self,
        buffer: &ReplayBuffer<GnnTransition>,
        cfg: &ScenarioConfig,
        rng: &mut RngStream,
    ) -> Result<Option<GnnLosses>> {
        if buffer.len() < cfg.gnn_warmup || buffer.is_empty() {
            return Ok(None);
        }
        let mut out = GnnLosses::default();
        for it in 1..=cfg.gnn_iterations {
            let items = buffer.sample(cfg.gnn_batch_size, rng);
            let l = self.train_iteration(&items, cfg)?;
            out.critic = l.critic;
            out.gnn = l.gnn;
            out.iterations += 1;
            if it % cfg.gnn_target_update_period == 0 {
                self.target_critic
                    .params
                    .soft_update(&self.critic.params, cfg.tau_gnn);
            }
        }
        Ok(Some(out))
    }
}
