use ndarray::{Array2, ArrayView2};

use super::replay::{ReplayBuffer, Transition};
use super::{CRITIC_DIM, STATE_DIM};
use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::nn::policy::{self, PolicyHead, PolicySample};
use crate::nn::{Activation, AdamState, Checkpoint, Mlp, ParamVector};
use crate::rng::RngStream;

/// Per-vehicle soft actor-critic: actor, twin critics, twin target critics and
/// a log-parameterized temperature, each with its own Adam state.
#[derive(Debug, Clone, PartialEq)]
pub struct SacModel {
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub target1: Mlp,
    pub target2: Mlp,
    pub log_temperature: f64,
    pub actor_opt: AdamState,
    pub critic1_opt: AdamState,
    pub critic2_opt: AdamState,
    pub temperature_opt: AdamState,
    /// Completed training iterations.
    pub updates: u64,
}

/// Actor, critic and target-critic losses from the most recent iteration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Losses {
    pub actor: f64,
    pub critic: f64,
    pub target_critic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStats {
    pub iterations: usize,
    pub target_updates: usize,
    pub losses: Losses,
}

/// A sampled minibatch in matrix form.
#[derive(Debug, Clone)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Array2<f64>,
}

impl Batch {
    pub fn from_transitions(items: &[Transition]) -> Self {
        let n = items.len();
        let mut states = Array2::zeros((n, STATE_DIM));
        let mut next_states = Array2::zeros((n, STATE_DIM));
        for (i, t) in items.iter().enumerate() {
            for k in 0..STATE_DIM {
                states[[i, k]] = t.state[k];
                next_states[[i, k]] = t.next_state[k];
            }
        }
        Self {
            states,
            actions: items.iter().map(|t| t.action).collect(),
            rewards: items.iter().map(|t| t.reward).collect(),
            next_states,
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Critic input rows `[state, power / p_max]`.
pub fn critic_input(states: ArrayView2<f64>, actions: &[f64], p_max: f64) -> Array2<f64> {
    let n = states.nrows();
    let mut x = Array2::zeros((n, CRITIC_DIM));
    for i in 0..n {
        for k in 0..STATE_DIM {
            x[[i, k]] = states[[i, k]];
        }
        x[[i, STATE_DIM]] = actions[i] / p_max;
    }
    x
}

fn heads_from(out: &Array2<f64>) -> Vec<PolicyHead> {
    out.rows()
        .into_iter()
        .map(|r| PolicyHead::new(r[0], r[1]))
        .collect()
}

/// Mean squared residual `(Q(x) - y)^2` and its parameter gradient.
pub fn critic_loss_grad(
    critic: &Mlp,
    inputs: ArrayView2<f64>,
    targets: &[f64],
) -> Result<(f64, ParamVector)> {
    critic.mse_loss_grad(inputs, targets)
}

/// Result of evaluating the reparameterized actor objective.
#[derive(Debug, Clone)]
pub struct ActorEval {
    pub loss: f64,
    pub grad: ParamVector,
    pub log_probs: Vec<f64>,
    pub samples: Vec<PolicySample>,
}

/// Actor objective `mean(beta * log pi(a~|s) - min(Q1, Q2)(s, a~))` with the
/// noise `noise[i]` held fixed, and its gradient with respect to the actor.
pub fn actor_loss_grad(
    actor: &Mlp,
    critic1: &Mlp,
    critic2: &Mlp,
    temperature: f64,
    states: ArrayView2<f64>,
    noise: &[f64],
    p_max: f64,
) -> Result<ActorEval> {
    let n = states.nrows();
    let (out, cache) = actor.forward(states)?;
    let samples: Vec<PolicySample> = heads_from(&out)
        .into_iter()
        .zip(noise)
        .map(|(h, &e)| policy::squashed_from_noise(h, e, p_max))
        .collect();
    let actions: Vec<f64> = samples.iter().map(|s| s.action).collect();
    let x = critic_input(states, &actions, p_max);
    let (q1, c1) = critic1.forward(x.view())?;
    let (q2, c2) = critic2.forward(x.view())?;
    let mut sel1 = Array2::zeros((n, 1));
    let mut sel2 = Array2::zeros((n, 1));
    let mut loss = 0.0;
    for i in 0..n {
        let qmin = if q1[[i, 0]] <= q2[[i, 0]] {
            sel1[[i, 0]] = 1.0;
            q1[[i, 0]]
        } else {
            sel2[[i, 0]] = 1.0;
            q2[[i, 0]]
        };
        loss += temperature * samples[i].log_prob - qmin;
    }
    let (_, dx1) = critic1.backward(&c1, sel1.view())?;
    let (_, dx2) = critic2.backward(&c2, sel2.view())?;
    let inv_n = 1.0 / n as f64;
    let mut g_out = Array2::zeros((n, 2));
    for i in 0..n {
        let dq_da = (dx1[[i, STATE_DIM]] + dx2[[i, STATE_DIM]]) / p_max;
        let s = &samples[i];
        g_out[[i, 0]] = inv_n * (temperature * s.dlogp_dmean - dq_da * s.daction_dmean);
        g_out[[i, 1]] = inv_n * (temperature * s.dlogp_dlogstd - dq_da * s.daction_dlogstd);
    }
    let (grad, _) = actor.backward(&cache, g_out.view())?;
    Ok(ActorEval {
        loss: loss * inv_n,
        grad,
        log_probs: samples.iter().map(|s| s.log_prob).collect(),
        samples,
    })
}

/// Gradient of the temperature objective with respect to `log beta`:
/// `mean(-log pi - target_entropy)`.
pub fn temperature_grad(log_probs: &[f64], target_entropy: f64) -> f64 {
    if log_probs.is_empty() {
        return 0.0;
    }
    log_probs.iter().map(|lp| -lp - target_entropy).sum::<f64>() / log_probs.len() as f64
}

impl SacModel {
    pub fn new(cfg: &ScenarioConfig, rng: &mut RngStream) -> Self {
        let h = cfg.hidden_width;
        let actor = Mlp::new(&[STATE_DIM, h, h, 2], Activation::Relu, rng);
        let critic1 = Mlp::new(&[CRITIC_DIM, h, h, 1], Activation::Relu, rng);
        let critic2 = Mlp::new(&[CRITIC_DIM, h, h, 1], Activation::Relu, rng);
        let (target1, target2) = (critic1.clone(), critic2.clone());
        Self::from_networks(
            actor,
            critic1,
            critic2,
            target1,
            target2,
            cfg.init_temperature.ln(),
            cfg,
        )
    }

    pub fn from_networks(
        actor: Mlp,
        critic1: Mlp,
        critic2: Mlp,
        target1: Mlp,
        target2: Mlp,
        log_temperature: f64,
        cfg: &ScenarioConfig,
    ) -> Self {
        Self {
            actor_opt: AdamState::for_params(&actor.params, cfg.lr_actor),
            critic1_opt: AdamState::for_params(&critic1.params, cfg.lr_critic),
            critic2_opt: AdamState::for_params(&critic2.params, cfg.lr_critic),
            temperature_opt: AdamState::new(1, cfg.lr_temperature),
            actor,
            critic1,
            critic2,
            target1,
            target2,
            log_temperature,
            updates: 0,
        }
    }

    pub fn temperature(&self) -> f64 {
        self.log_temperature.exp()
    }

    /// Parameters of actor, both critics and both targets.
    pub fn exchanged_param_count(&self) -> usize {
        self.actor.params.len()
            + self.critic1.params.len()
            + self.critic2.params.len()
            + self.target1.params.len()
            + self.target2.params.len()
    }

    pub fn head(&self, state: &[f64; STATE_DIM]) -> PolicyHead {
        let out = self
            .actor
            .predict_one(state)
            .expect("actor takes the state vector");
        PolicyHead::new(out[0], out[1])
    }

    /// Transmit power for `state`: a squashed-Gaussian sample when exploring,
    /// the squashed mean otherwise.
    pub fn select_action(
        &self,
        state: &[f64; STATE_DIM],
        rng: &mut RngStream,
        explore: bool,
        p_max: f64,
    ) -> f64 {
        let head = self.head(state);
        if explore {
            policy::sample_squashed_gaussian(head, rng, p_max).action
        } else {
            policy::deterministic_action(head, p_max)
        }
    }

    /// Soft Bellman targets `r + gamma * (min(Qt1, Qt2)(s', a') - beta log pi(a'|s'))`
    /// with `a'` drawn from the current actor using the given noise.
    pub fn targets_with_noise(
        &self,
        next_states: ArrayView2<f64>,
        rewards: &[f64],
        noise: &[f64],
        discount: f64,
        p_max: f64,
    ) -> Result<Vec<f64>> {
        let out = self.actor.predict(next_states)?;
        let samples: Vec<PolicySample> = heads_from(&out)
            .into_iter()
            .zip(noise)
            .map(|(h, &e)| policy::squashed_from_noise(h, e, p_max))
            .collect();
        let actions: Vec<f64> = samples.iter().map(|s| s.action).collect();
        let x = critic_input(next_states, &actions, p_max);
        let q1 = self.target1.predict(x.view())?;
        let q2 = self.target2.predict(x.view())?;
        let beta = self.temperature();
        Ok((0..rewards.len())
            .map(|i| {
                let soft = q1[[i, 0]].min(q2[[i, 0]]) - beta * samples[i].log_prob;
                rewards[i] + discount * soft
            })
            .collect())
    }

    pub fn compute_targets(
        &self,
        batch: &Batch,
        discount: f64,
        p_max: f64,
        rng: &mut RngStream,
    ) -> Result<Vec<f64>> {
        let noise: Vec<f64> = (0..batch.len()).map(|_| rng.normal()).collect();
        self.targets_with_noise(
            batch.next_states.view(),
            &batch.rewards,
            &noise,
            discount,
            p_max,
        )
    }

    /// One Adam step for each critic; returns the pre-step losses.
    pub fn update_critics(
        &mut self,
        batch: &Batch,
        targets: &[f64],
        p_max: f64,
    ) -> Result<(f64, f64)> {
        let x = critic_input(batch.states.view(), &batch.actions, p_max);
        let (l1, g1) = critic_loss_grad(&self.critic1, x.view(), targets)?;
        let (l2, g2) = critic_loss_grad(&self.critic2, x.view(), targets)?;
        self.critic1_opt.step(&mut self.critic1.params, &g1);
        self.critic2_opt.step(&mut self.critic2.params, &g2);
        Ok((l1, l2))
    }

    /// One Adam step on the actor with fixed noise; returns the pre-step loss.
    pub fn update_actor_with_noise(
        &mut self,
        states: ArrayView2<f64>,
        noise: &[f64],
        p_max: f64,
    ) -> Result<f64> {
        let eval = actor_loss_grad(
            &self.actor,
            &self.critic1,
            &self.critic2,
            self.temperature(),
            states,
            noise,
            p_max,
        )?;
        self.actor_opt.step(&mut self.actor.params, &eval.grad);
        Ok(eval.loss)
    }

    pub fn update_actor(&mut self, batch: &Batch, p_max: f64, rng: &mut RngStream) -> Result<f64> {
        let noise: Vec<f64> = (0..batch.len()).map(|_| rng.normal()).collect();
        self.update_actor_with_noise(batch.states.view(), &noise, p_max)
    }

    /// Log-probabilities of reparameterized actions at `states` under fixed noise.
    pub fn log_probs(
        &self,
        states: ArrayView2<f64>,
        noise: &[f64],
        p_max: f64,
    ) -> Result<Vec<f64>> {
        let out = self.actor.predict(states)?;
        Ok(heads_from(&out)
            .into_iter()
            .zip(noise)
            .map(|(h, &e)| policy::squashed_from_noise(h, e, p_max).log_prob)
            .collect())
    }

    /// One Adam step on `log beta`; returns the new temperature.
    pub fn update_temperature(&mut self, log_probs: &[f64], target_entropy: f64) -> f64 {
        let g = temperature_grad(log_probs, target_entropy);
        let mut p = [self.log_temperature];
        self.temperature_opt.step_slice(&mut p, &[g]);
        self.log_temperature = p[0];
        self.temperature()
    }

    pub fn soft_update_targets(&mut self, tau1: f64, tau2: f64) {
        self.target1.params.soft_update(&self.critic1.params, tau1);
        self.target2.params.soft_update(&self.critic2.params, tau2);
    }

    /// Mean squared error of the target critics against `targets` on the batch.
    pub fn target_critic_loss(&self, batch: &Batch, targets: &[f64], p_max: f64) -> Result<f64> {
        let x = critic_input(batch.states.view(), &batch.actions, p_max);
        let q1 = self.target1.predict(x.view())?;
        let q2 = self.target2.predict(x.view())?;
        let n = targets.len() as f64;
        let mut acc = 0.0;
        for (i, y) in targets.iter().enumerate() {
            acc += 0.5 * ((q1[[i, 0]] - y).powi(2) + (q2[[i, 0]] - y).powi(2));
        }
        Ok(acc / n)
    }

    /// One training iteration on `batch`: temperature, actor, then critics.
    pub fn train_iteration(
        &mut self,
        batch: &Batch,
        cfg: &ScenarioConfig,
        rng: &mut RngStream,
    ) -> Result<Losses> {
        self.iterate(batch, cfg, rng, true)
    }

    /// `measure_target` controls whether the target-critic loss (a logging
    /// quantity) is evaluated.
    fn iterate(
        &mut self,
        batch: &Batch,
        cfg: &ScenarioConfig,
        rng: &mut RngStream,
        measure_target: bool,
    ) -> Result<Losses> {
        let p_max = cfg.p_max;
        let noise: Vec<f64> = (0..batch.len()).map(|_| rng.normal()).collect();
        let log_probs = self.log_probs(batch.states.view(), &noise, p_max)?;
        self.update_temperature(&log_probs, cfg.target_entropy);
        let actor = self.update_actor_with_noise(batch.states.view(), &noise, p_max)?;
        let targets = self.compute_targets(batch, cfg.discount, p_max, rng)?;
        let target_critic = if measure_target {
            self.target_critic_loss(batch, &targets, p_max)?
        } else {
            0.0
        };
        let (l1, l2) = self.update_critics(batch, &targets, p_max)?;
        self.updates += 1;
        Ok(Losses {
            actor,
            critic: 0.5 * (l1 + l2),
            target_critic,
        })
    }

    /// Runs `iterations` SAC iterations once the replay holds at least
    /// `cfg.warmup` transitions. Returns `None` (and changes nothing) otherwise.
    pub fn local_train(
        &mut self,
        replay: &ReplayBuffer,
        iterations: usize,
        cfg: &ScenarioConfig,
        rng: &mut RngStream,
    ) -> Result<Option<TrainStats>> {
        if replay.len() < cfg.warmup || replay.is_empty() {
            return Ok(None);
        }
        let mut stats = TrainStats {
            iterations: 0,
            target_updates: 0,
            losses: Losses::default(),
        };
        for it in 1..=iterations {
            let batch = Batch::from_transitions(&replay.sample(cfg.batch_size, rng));
            stats.losses = self.iterate(&batch, cfg, rng, it == iterations)?;
            stats.iterations += 1;
            if it % cfg.target_update_period == 0 {
                self.soft_update_targets(cfg.tau_critic1, cfg.tau_critic2);
                stats.target_updates += 1;
            }
        }
        Ok(Some(stats))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            scalars: vec![("log_temperature".into(), self.log_temperature)],
            nets: vec![
                ("actor".into(), self.actor.params.clone()),
                ("critic1".into(), self.critic1.params.clone()),
                ("critic2".into(), self.critic2.params.clone()),
                ("target1".into(), self.target1.params.clone()),
                ("target2".into(), self.target2.params.clone()),
            ],
        }
    }

    /// Restores networks from a checkpoint; optimizer state starts fresh.
    pub fn from_checkpoint(ck: &Checkpoint, cfg: &ScenarioConfig) -> Result<Self> {
        let net = |name: &str| -> Result<Mlp> {
            Ok(Mlp::from_params(ck.net(name)?.clone(), Activation::Relu))
        };
        Ok(Self::from_networks(
            net("actor")?,
            net("critic1")?,
            net("critic2")?,
            net("target1")?,
            net("target2")?,
            ck.scalar("log_temperature")?,
            cfg,
        ))
    }
}
