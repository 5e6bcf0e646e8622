//! Worked examples checked against independent oracles: hand arithmetic,
//! naive loops, quadrature and numerical differentiation.

use ndarray::Array2;
use vec_offload::aoi::{self, PenaltyState, Task, TaskQueue};
use vec_offload::baselines::{self, Scheme};
use vec_offload::channel::{self, Complex};
use vec_offload::config::ScenarioConfig;
use vec_offload::federated::{self, CriticPair, GlobalModelStore};
use vec_offload::graph::{self, GraphBatch, GraphVehicle, RoadGraph, NODE_FEATURES};
use vec_offload::nn::policy::{self, PolicyHead};
use vec_offload::nn::{Activation, AdamState, Layer, Mlp, ParamVector};
use vec_offload::output;
use vec_offload::rng::RngStream;
use vec_offload::sac::{self, Batch, Losses, Observation, SacModel, Transition};
use vec_offload::scenario::{self, VehicleState};
use vec_offload::sim;

use super::{bessel_j0_quadrature, rel_close};

/// Relative tolerance of deterministic arithmetic cases.
pub const ARITH_TOL: f64 = 1e-9;
/// Relative tolerance of the Bessel evaluation.
pub const BESSEL_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub ok: bool,
    pub detail: String,
}

struct Checks(Vec<Check>);

impl Checks {
    fn close(&mut self, name: &'static str, actual: f64, expected: f64, tol: f64) {
        let ok = if expected == 0.0 {
            actual.abs() <= tol
        } else {
            rel_close(actual, expected, tol)
        };
        self.0.push(Check {
            name,
            ok,
            detail: format!("got {actual:e}, expected {expected:e}"),
        });
    }

    fn truth(&mut self, name: &'static str, ok: bool, detail: String) {
        self.0.push(Check { name, ok, detail });
    }
}

fn scalar(v: f64) -> ParamVector {
    let mut l = Layer::zeros(1, 1);
    l.weight[[0, 0]] = v;
    ParamVector::new(vec![l])
}

fn pair(a: f64, b: f64) -> ParamVector {
    let mut l = Layer::zeros(2, 1);
    l.weight[[0, 0]] = a;
    l.weight[[1, 0]] = b;
    ParamVector::new(vec![l])
}

fn small_cfg() -> ScenarioConfig {
    ScenarioConfig {
        hidden_width: 8,
        gnn_hidden: vec![4],
        gnn_critic_width: 8,
        ..ScenarioConfig::desk_scale()
    }
}

fn scalar_model(v: f64, cfg: &ScenarioConfig) -> SacModel {
    let net = || Mlp::from_params(scalar(v), Activation::Relu);
    SacModel::from_networks(net(), net(), net(), net(), net(), 0.0, cfg)
}

fn pair_model(a: f64, b: f64, cfg: &ScenarioConfig) -> SacModel {
    let net = || Mlp::from_params(pair(a, b), Activation::Relu);
    SacModel::from_networks(net(), net(), net(), net(), net(), 0.0, cfg)
}

fn scenario_checks(c: &mut Checks) {
    let cfg = small_cfg();
    let mut rng = RngStream::new(3);
    let sac = SacModel::new(&cfg, &mut rng);
    let mut vehicles = vec![VehicleState::spawn(0, 0, 0.0, sac, &cfg, &mut rng)];
    let x0 = vehicles[0].x;
    scenario::advance_positions(&mut vehicles, &cfg);
    c.close(
        "position step v*tau",
        vehicles[0].x - x0,
        (30.0 / 3.6) * 0.02,
        ARITH_TOL,
    );
}

fn channel_checks(c: &mut Checks) {
    c.close(
        "path loss at 1 m",
        channel::path_loss_db(1.0),
        61.4,
        ARITH_TOL,
    );
    c.close(
        "path loss at 100 m",
        channel::path_loss_db(100.0),
        101.4,
        ARITH_TOL,
    );
    c.close(
        "shadow correlation at d_cor",
        channel::shadow_correlation(10.0, 10.0),
        (-1.0f64).exp(),
        ARITH_TOL,
    );
    let fd = channel::doppler_hz(30.0 / 3.6, 28e9, 3e8);
    c.close(
        "doppler at 30 km/h and 28 GHz",
        fd,
        (30.0 / 3.6) * 28e9 / 3e8,
        ARITH_TOL,
    );
    c.truth(
        "doppler rounds to 777.78 Hz",
        (fd - 777.78).abs() < 5e-3,
        format!("{fd}"),
    );
    let arg = 2.0 * std::f64::consts::PI * 777.78 * 0.02;
    c.close(
        "fading correlation J0(2 pi 777.78 0.02)",
        channel::fading_correlation(777.78, 0.02),
        bessel_j0_quadrature(arg),
        BESSEL_TOL,
    );
    for x in [0.0, 0.5, 1.0, 7.0, 30.0, 97.738] {
        c.close(
            "Bessel J0 sweep",
            channel::bessel_j0(x),
            bessel_j0_quadrature(x),
            BESSEL_TOL,
        );
    }
    let one = Complex::new(1.0, 0.0);
    c.close(
        "power gain at 130 dB",
        channel::channel_power_gain(30.0, 100.0, one),
        1e-13,
        ARITH_TOL,
    );
    let noise = 3.98e-14;
    let r = channel::compute_rates(&[1.0], &[noise], &[], &[], 2e8, noise);
    c.close("single vehicle SINR 1", r[0], 2e8, ARITH_TOL);
    let r = channel::compute_rates(&[1.0, 1.0], &[noise, noise], &[], &[], 2e8, noise);
    c.close(
        "two symmetric vehicles",
        r[0],
        2e8 * 1.5f64.log2(),
        ARITH_TOL,
    );
    c.close(
        "two symmetric vehicles, second",
        r[1],
        2e8 * 1.5f64.log2(),
        ARITH_TOL,
    );
}

fn aoi_checks(c: &mut Checks) {
    let mut q = TaskQueue::new();
    q.push(Task::new(8e5));
    q.push(Task::new(8e5));
    let st = q.step(1e8, 0.02);
    c.close("delivered head bits", st.delivered_bits, 8e5, ARITH_TOL);
    c.close(
        "head AoI grows by size/rate",
        st.delivered_aoi,
        8e5 / 1e8,
        ARITH_TOL,
    );
    c.truth(
        "head removed",
        q.len() == 1,
        format!("queue length {}", q.len()),
    );
    c.close(
        "second task aged one slot",
        q.head().map_or(f64::NAN, |t| t.aoi),
        0.02,
        ARITH_TOL,
    );
    let mut aged = TaskQueue::new();
    aged.push(Task::new(1e9));
    aged.step(0.0, 0.02);
    aged.push(Task::new(1e9));
    c.close(
        "waiting head ages one slot",
        aged.head().unwrap().aoi,
        0.02,
        ARITH_TOL,
    );
    c.close(
        "queue average AoI",
        aged.average_aoi(),
        (0.02 + 0.0) / 2.0,
        ARITH_TOL,
    );
    c.close(
        "system average of [1, 2]",
        aoi::system_average_aoi(&[1.0, 2.0]),
        1.5,
        ARITH_TOL,
    );

    let mut p = PenaltyState { xi: 1.0 };
    c.close(
        "penalty with one departure",
        p.step(&[2.0], 4, 0.9999),
        1.0 + 2.0 / 4.0,
        ARITH_TOL,
    );
    let mut p = PenaltyState { xi: 1.0 };
    c.close("penalty decay", p.step(&[], 4, 0.9999), 0.9999, ARITH_TOL);

    let cfg = ScenarioConfig::default();
    let r = aoi::reward(2.0, 1.0, 10.0, 3, 0.0, &cfg);
    c.close(
        "reward with queued tasks",
        r,
        -(2.0 + 10.0 * (1.0 + 2.0 / 1.0)) * 0.1,
        ARITH_TOL,
    );
    let r = aoi::reward(2.0, 0.0, 1.0, 0, 0.0, &cfg);
    c.close(
        "reward with empty queue",
        r,
        -(2.0 + 1.0 * (1.0 + 2.0)) * 0.1,
        ARITH_TOL,
    );
}

/// Forward pass written as plain loops over the layer matrices.
fn naive_forward(params: &ParamVector, x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    let n = params.layers.len();
    for (k, l) in params.layers.iter().enumerate() {
        let mut out = vec![0.0; l.out_dim()];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = l.bias[i];
            for (j, hj) in h.iter().enumerate() {
                acc += l.weight[[i, j]] * hj;
            }
            *o = if k + 1 < n { acc.max(0.0) } else { acc };
        }
        h = out;
    }
    h
}

fn nn_checks(c: &mut Checks) {
    let mut rng = RngStream::new(11);
    let net = Mlp::new(&[6, 256, 256, 1], Activation::Relu, &mut rng);
    let x = Array2::from_shape_simple_fn((4, 6), || rng.uniform_range(-2.0, 2.0));
    let y = net.predict(x.view()).unwrap();
    let mut worst = 0.0f64;
    for (i, row) in x.rows().into_iter().enumerate() {
        let want = naive_forward(&net.params, row.as_slice().unwrap())[0];
        worst = worst.max((y[[i, 0]] - want).abs() / want.abs().max(1e-300));
    }
    c.truth(
        "6-256-256-1 forward vs loops",
        worst <= 1e-10,
        format!("max rel error {worst:e}"),
    );

    // first Adam step: m_hat = g, v_hat = g^2, step = lr * g / (|g| + eps)
    let g = 0.37;
    let mut p = [1.0];
    let mut adam = AdamState::new(1, 1e-3);
    adam.step_slice(&mut p, &[g]);
    c.close(
        "first Adam step",
        p[0],
        1.0 - 1e-3 * g / (g.abs() + 1e-8),
        ARITH_TOL,
    );
    c.truth(
        "first Adam step ~ -lr sign(g)",
        (p[0] - (1.0 - 1e-3)).abs() < 1e-9,
        format!("{}", p[0]),
    );

    let mut target = scalar(0.0);
    target.soft_update(&scalar(1.0), 0.005);
    c.close(
        "soft update 0 <- 1",
        target.layers[0].weight[[0, 0]],
        0.005,
        ARITH_TOL,
    );
}

/// `P(A <= a)` for the squashed action: `Phi((atanh(2a/p_max - 1) - mean) / std)`.
fn squashed_cdf(head: PolicyHead, a: f64, p_max: f64) -> f64 {
    let u = (2.0 * a / p_max - 1.0).atanh();
    let z = (u - head.mean) / head.clamped_log_std().exp();
    0.5 * libm_erfc(-z / std::f64::consts::SQRT_2)
}

/// Complementary error function (Numerical Recipes `erfcc`, rel. error < 1.2e-7).
fn libm_erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277)))))))))
            .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

fn policy_checks(c: &mut Checks) {
    let p_max = 20.0;
    let head = PolicyHead::new(0.3, -0.4);
    let mut worst = 0.0f64;
    for eps in [-1.5, -0.5, 0.0, 0.7, 1.3] {
        let s = policy::squashed_from_noise(head, eps, p_max);
        let h = 1e-4 * p_max;
        let density = (squashed_cdf(head, s.action + h, p_max)
            - squashed_cdf(head, s.action - h, p_max))
            / (2.0 * h);
        worst = worst.max((density.ln() - s.log_prob).abs());
    }
    c.truth(
        "log-prob vs numerical CDF density",
        worst < 1e-3,
        format!("max |dlog| {worst:e}"),
    );
    let mid = policy::deterministic_action(PolicyHead::new(0.0, -30.0), p_max);
    c.close("zero mean gives p_max/2", mid, 10.0, ARITH_TOL);
    c.truth(
        "saturation limits",
        policy::deterministic_action(PolicyHead::new(40.0, 0.0), p_max) == p_max
            && policy::deterministic_action(PolicyHead::new(-40.0, 0.0), p_max) == 0.0,
        String::new(),
    );
}

fn sac_checks(c: &mut Checks) {
    let cfg = small_cfg();
    let obs = Observation {
        gain: 1e-10,
        head_aoi: 0.5,
        system_aoi: 1.0,
        distance: 125.0,
        head_size: cfg.task_size_max,
        n_vehicles: 5,
    };
    let s = sac::build_state(&obs, &cfg);
    c.close("head size normalization at d_max", s[4], 1.0, ARITH_TOL);
    let half = sac::build_state(
        &Observation {
            head_size: 0.5 * cfg.task_size_max,
            ..obs
        },
        &cfg,
    );
    c.close(
        "head size normalization at d_max/2",
        half[4],
        0.5,
        ARITH_TOL,
    );

    let mut rng = RngStream::new(5);
    let mut m = SacModel::new(&cfg, &mut rng);
    if let Some(l) = m.actor.params.layers.last_mut() {
        l.weight.fill(0.0);
        l.bias.fill(0.0);
    }
    let a = m.select_action(&s, &mut rng, false, cfg.p_max);
    c.close(
        "zero final actor layer acts at p_max/2",
        a,
        cfg.p_max / 2.0,
        ARITH_TOL,
    );

    // twin targets 3 and 5, beta = 0, r = 1, gamma = 0.5
    let constant = |v: f64| {
        let mut p = m.critic1.params.zeros_like();
        p.layers.last_mut().unwrap().bias[0] = v;
        Mlp::from_params(p, Activation::Relu)
    };
    let m2 = SacModel::from_networks(
        m.actor.clone(),
        m.critic1.clone(),
        m.critic2.clone(),
        constant(3.0),
        constant(5.0),
        f64::NEG_INFINITY,
        &cfg,
    );
    let next = Array2::from_shape_vec((1, 6), s.to_vec()).unwrap();
    let y = m2
        .targets_with_noise(next.view(), &[1.0], &[0.3], 0.5, cfg.p_max)
        .unwrap();
    c.close(
        "soft Bellman target",
        y[0],
        1.0 + 0.5 * 3.0f64.min(5.0),
        ARITH_TOL,
    );

    // critic loss decreases on a stationary batch
    let items: Vec<Transition> = (0..32)
        .map(|_| {
            let mut st = [0.0; 6];
            st.iter_mut().for_each(|v| *v = rng.uniform());
            Transition {
                state: st,
                action: rng.uniform_range(0.0, cfg.p_max),
                reward: -rng.uniform(),
                next_state: st,
            }
        })
        .collect();
    let batch = Batch::from_transitions(&items);
    let targets: Vec<f64> = batch.rewards.clone();
    let (first, _) = m.update_critics(&batch, &targets, cfg.p_max).unwrap();
    let mut last = first;
    for _ in 0..99 {
        last = m.update_critics(&batch, &targets, cfg.p_max).unwrap().0;
    }
    c.truth(
        "critic loss decreases over 100 updates",
        last < first,
        format!("{first} -> {last}"),
    );

    // temperature: log beta' = log beta - lr * g / (|g| + eps) on the first step
    let lps = [-0.3, 0.1, -2.0];
    let g = sac::temperature_grad(&lps, cfg.target_entropy);
    let before = m.log_temperature;
    let beta = m.update_temperature(&lps, cfg.target_entropy);
    c.close(
        "temperature Adam step",
        beta,
        (before - cfg.lr_temperature * g / (g.abs() + 1e-8)).exp(),
        ARITH_TOL,
    );
}

fn graph_checks(c: &mut Checks) {
    let cfg = small_cfg();
    let v = |x: f64| GraphVehicle {
        lane: 0,
        position: (x, cfg.lane_y(0)),
        local_agg_count: 0,
        losses: Losses::default(),
    };
    let g = RoadGraph::build(&[v(-75.0), v(-25.0)], &cfg).unwrap();
    let a = g.adjacency();
    c.truth(
        "vehicles 50 m apart link segments 3 and 4",
        g.vehicle_nodes == [3, 4] && a[[3, 4]] == 1.0 && a[[4, 3]] == 1.0 && g.edge_count() == 1,
        format!("nodes {:?}", g.vehicle_nodes),
    );

    // 3-node path 0-1-2, vehicle counts 1, 2, 3, scalar hidden layer
    let mut features = Array2::zeros((3, NODE_FEATURES));
    for i in 0..3 {
        features[[i, 0]] = (i + 1) as f64;
    }
    let path = RoadGraph {
        features,
        neighbors: vec![vec![1], vec![0, 2], vec![1]],
        vehicle_nodes: vec![],
    };
    let (w1, b1, w2, b2) = (0.7, -0.2, 1.3, 0.05);
    let mut l1 = Layer::zeros(1, NODE_FEATURES);
    l1.weight[[0, 0]] = w1;
    l1.bias[0] = b1;
    let mut l2 = Layer::zeros(1, 1);
    l2.weight[[0, 0]] = w2;
    l2.bias[0] = b2;
    let params = ParamVector::new(vec![l1, l2]);
    let (emb, _) = graph::gnn_forward(&params, &GraphBatch::single(&path)).unwrap();
    let x = [2f64.ln(), 3f64.ln(), 4f64.ln()];
    let u: Vec<f64> = x.iter().map(|v| w1 * v + b1).collect();
    let h = [
        (u[0] + u[1]).tanh(),
        (u[1] + 0.5 * (u[0] + u[2])).tanh(),
        (u[2] + u[1]).tanh(),
    ];
    let u2: Vec<f64> = h.iter().map(|v| w2 * v + b2).collect();
    let want = [u2[0] + u2[1], u2[1] + 0.5 * (u2[0] + u2[2]), u2[2] + u2[1]];
    let worst = (0..3)
        .map(|i| (emb[[i, 0]] - want[i]).abs() / want[i].abs())
        .fold(0.0, f64::max);
    c.truth(
        "3-node path propagation",
        worst <= 1e-10,
        format!("max rel error {worst:e}"),
    );

    let two = RoadGraph {
        features: Array2::zeros((2, NODE_FEATURES)),
        neighbors: vec![vec![1], vec![0]],
        vehicle_nodes: vec![0, 1],
    };
    let w = graph::aggregation_weights(&[2f64.ln(), 1f64.ln()], &two, 0, &[1]);
    c.close("softmax self weight", w[0].1, 2.0 / 3.0, ARITH_TOL);
    c.close("softmax neighbor weight", w[1].1, 1.0 / 3.0, ARITH_TOL);
}

fn federated_checks(c: &mut Checks) {
    let cfg = small_cfg();
    let (a, b, d) = (scalar(4.0), scalar(0.0), scalar(8.0));
    let cp = |p| CriticPair {
        critic1: p,
        critic2: p,
    };
    let (agg, _) =
        federated::combine_critics(&[(cp(&a), 0.5), (cp(&b), 0.25), (cp(&d), 0.25)]).unwrap();
    c.close(
        "weighted critic combination",
        agg.layers[0].weight[[0, 0]],
        0.5 * 4.0 + 0.25 * 0.0 + 0.25 * 8.0,
        ARITH_TOL,
    );
    let u = federated::uniform_weights(3);
    let (agg, _) =
        federated::combine_critics(&[(cp(&a), u[0]), (cp(&b), u[1]), (cp(&d), u[2])]).unwrap();
    c.close(
        "uniform critic combination",
        agg.layers[0].weight[[0, 0]],
        (4.0 + 0.0 + 8.0) / 3.0,
        ARITH_TOL,
    );

    let bits = 2e8 * 0.02;
    let p = federated::model_upload_power(1e-13, bits, &ScenarioConfig::default());
    c.close(
        "upload power at SNR 1",
        p,
        3.98e-14 * (2f64.powf(bits / (2e8 * 0.02)) - 1.0) / 1e-13,
        ARITH_TOL,
    );

    let mut store = GlobalModelStore::from_model(&pair_model(0.0, 0.0, &cfg));
    store
        .global_aggregate(&[&pair_model(1.0, 3.0, &cfg), &pair_model(3.0, 5.0, &cfg)])
        .unwrap();
    let w = &store.actor.layers[0].weight;
    c.truth(
        "global element-wise mean",
        w[[0, 0]] == 2.0 && w[[1, 0]] == 4.0,
        format!("{w}"),
    );

    let mut store = GlobalModelStore::from_model(&scalar_model(2.0, &cfg));
    let mut up = scalar_model(4.0, &cfg);
    baselines::gfsac_on_train_complete(&mut store, &mut up).unwrap();
    c.close(
        "pairwise blend",
        store.actor.layers[0].weight[[0, 0]],
        3.0,
        ARITH_TOL,
    );
    c.close(
        "blend copied back",
        up.actor.params.layers[0].weight[[0, 0]],
        3.0,
        ARITH_TOL,
    );

    let cfg = ScenarioConfig::default();
    let q = baselines::gdbr_step(&[Some(1.0), Some(1.0)], &[0.0, 0.0], 1.0, &cfg);
    c.close("GDBR full offload", q[0] * cfg.p_max, cfg.p_max, ARITH_TOL);
    let q = baselines::gdbr_probability(Some(0.5), 1.0, 1.0, &cfg);
    c.close("GDBR priced out", q, 0.0, ARITH_TOL);
}

fn output_checks(c: &mut Checks) {
    let cfg = ScenarioConfig {
        train_slots: 400,
        ..small_cfg()
    };
    let out = sim::run_training(&cfg, Scheme::Gdbr, 9).unwrap();
    let text = output::records_csv(&out.records);
    let recs = output::parse_records_csv(&text).unwrap();
    let n = recs.len() as f64;
    let aoi: f64 = recs.iter().map(|r| r.avg_aoi).sum::<f64>() / n;
    let power: f64 = recs.iter().map(|r| r.avg_power).sum::<f64>() / n;
    let bits: f64 = recs.iter().map(|r| r.delivered_bits).sum::<f64>() / n;
    let s = &out.summary;
    c.close("summary AoI vs CSV", s.avg_aoi, aoi, ARITH_TOL);
    c.close("summary power vs CSV", s.avg_power, power, ARITH_TOL);
    c.close(
        "summary throughput vs CSV",
        s.throughput,
        bits / cfg.slot,
        ARITH_TOL,
    );
}

/// Every oracle check.
pub fn all() -> Vec<Check> {
    let mut c = Checks(Vec::new());
    scenario_checks(&mut c);
    channel_checks(&mut c);
    aoi_checks(&mut c);
    nn_checks(&mut c);
    policy_checks(&mut c);
    sac_checks(&mut c);
    graph_checks(&mut c);
    federated_checks(&mut c);
    output_checks(&mut c);
    c.0
}
