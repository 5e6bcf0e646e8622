//! Two-tier federated exchange: download on entry, weighted local critic
//! aggregation between nearby vehicles, and upload plus global averaging at
//! the RSU when vehicles leave coverage.

use std::fmt::Write as _;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::nn::{Activation, Checkpoint, Mlp, ParamVector};
use crate::rng::RngStream;
use crate::sac::SacModel;

/// Bits per exchanged parameter.
pub const BITS_PER_PARAM: usize = 32;

/// The RSU's global SAC model.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalModelStore {
    pub actor: ParamVector,
    pub critic1: ParamVector,
    pub critic2: ParamVector,
    pub target1: ParamVector,
    pub target2: ParamVector,
    pub version: u64,
}

impl GlobalModelStore {
    pub fn new(cfg: &ScenarioConfig, rng: &mut RngStream) -> Self {
        Self::from_model(&SacModel::new(cfg, rng))
    }

    pub fn from_model(m: &SacModel) -> Self {
        Self {
            actor: m.actor.params.clone(),
            critic1: m.critic1.params.clone(),
            critic2: m.critic2.params.clone(),
            target1: m.target1.params.clone(),
            target2: m.target2.params.clone(),
            version: 0,
        }
    }

    fn parts(&self) -> [&ParamVector; 5] {
        [
            &self.actor,
            &self.critic1,
            &self.critic2,
            &self.target1,
            &self.target2,
        ]
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let names = ["actor", "critic1", "critic2", "target1", "target2"];
        Checkpoint {
            scalars: vec![("version".into(), self.version as f64)],
            nets: names
                .iter()
                .zip(self.parts())
                .map(|(n, p)| (n.to_string(), p.clone()))
                .collect(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        Ok(Self {
            actor: ck.net("actor")?.clone(),
            critic1: ck.net("critic1")?.clone(),
            critic2: ck.net("critic2")?.clone(),
            target1: ck.net("target1")?.clone(),
            target2: ck.net("target2")?.clone(),
            version: ck.scalar("version")? as u64,
        })
    }

    /// Exchanged model size, bits.
    pub fn payload_bits(&self) -> f64 {
        (self.parts().iter().map(|p| p.len()).sum::<usize>() * BITS_PER_PARAM) as f64
    }

    /// A fresh vehicle model holding deep copies of the store's networks.
    pub fn download(&self, cfg: &ScenarioConfig) -> SacModel {
        let net = |p: &ParamVector| Mlp::from_params(p.clone(), Activation::Relu);
        SacModel::from_networks(
            net(&self.actor),
            net(&self.critic1),
            net(&self.critic2),
            net(&self.target1),
            net(&self.target2),
            cfg.init_temperature.ln(),
            cfg,
        )
    }

    /// Overwrites `model`'s networks with the store's, keeping its optimizer state.
    pub fn overwrite(&self, model: &mut SacModel) {
        model.actor.params = self.actor.clone();
        model.critic1.params = self.critic1.clone();
        model.critic2.params = self.critic2.clone();
        model.target1.params = self.target1.clone();
        model.target2.params = self.target2.clone();
    }

    /// Replaces every network with the mean over `models`; a no-op for an
    /// empty cohort. Returns whether the store changed version.
    pub fn global_aggregate(&mut self, models: &[&SacModel]) -> Result<bool> {
        if models.is_empty() {
            return Ok(false);
        }
        let mean = |f: fn(&SacModel) -> &ParamVector| -> Result<ParamVector> {
            ParamVector::mean(&models.iter().map(|m| f(m)).collect::<Vec<_>>())
        };
        self.actor = mean(|m| &m.actor.params)?;
        self.critic1 = mean(|m| &m.critic1.params)?;
        self.critic2 = mean(|m| &m.critic2.params)?;
        self.target1 = mean(|m| &m.target1.params)?;
        self.target2 = mean(|m| &m.target2.params)?;
        self.version += 1;
        Ok(true)
    }

    /// Equal-weight blend of the store with one uploaded model.
    pub fn blend_with(&mut self, model: &SacModel) -> Result<()> {
        let pair = |a: &ParamVector, b: &ParamVector| ParamVector::mean(&[a, b]);
        self.actor = pair(&self.actor, &model.actor.params)?;
        self.critic1 = pair(&self.critic1, &model.critic1.params)?;
        self.critic2 = pair(&self.critic2, &model.critic2.params)?;
        self.target1 = pair(&self.target1, &model.target1.params)?;
        self.target2 = pair(&self.target2, &model.target2.params)?;
        self.version += 1;
        Ok(())
    }
}

/// Both critics of one vehicle, as seen by local aggregation.
#[derive(Debug, Clone, Copy)]
pub struct CriticPair<'a> {
    pub critic1: &'a ParamVector,
    pub critic2: &'a ParamVector,
}

impl<'a> CriticPair<'a> {
    pub fn of(m: &'a SacModel) -> Self {
        Self {
            critic1: &m.critic1.params,
            critic2: &m.critic2.params,
        }
    }
}

/// Weighted combination of the participants' critics. Weights must be
/// non-negative and sum to one.
pub fn combine_critics(parts: &[(CriticPair<'_>, f64)]) -> Result<(ParamVector, ParamVector)> {
    if parts.is_empty() {
        return Err(Error::invalid(
            "local aggregation needs at least one participant",
        ));
    }
    let total: f64 = parts.iter().map(|(_, w)| w).sum();
    if parts.iter().any(|(_, w)| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "aggregation weights must form a simplex (sum {total})"
        )));
    }
    let c1: Vec<(&ParamVector, f64)> = parts.iter().map(|(p, w)| (p.critic1, *w)).collect();
    let c2: Vec<(&ParamVector, f64)> = parts.iter().map(|(p, w)| (p.critic2, *w)).collect();
    Ok((
        ParamVector::weighted_sum(&c1)?,
        ParamVector::weighted_sum(&c2)?,
    ))
}

/// Installs aggregated critics on `model`; actor and targets are untouched.
pub fn apply_local_aggregate(
    model: &mut SacModel,
    critics: (ParamVector, ParamVector),
    agg_count: &mut usize,
) {
    model.critic1.params = critics.0;
    model.critic2.params = critics.1;
    *agg_count += 1;
}

/// Uniform weights over `n` participants.
pub fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Interference-free power that sends `payload_bits` within one slot,
/// capped at `p_max`. A zero gain gets `p_max`.
pub fn model_upload_power(gain: f64, payload_bits: f64, cfg: &ScenarioConfig) -> f64 {
    if !(gain > 0.0) {
        return cfg.p_max;
    }
    let snr = (payload_bits / (cfg.bandwidth * cfg.slot)).exp2() - 1.0;
    (cfg.noise * snr / gain).min(cfg.p_max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UploadEvent {
    pub vehicle: u64,
    pub payload_bits: f64,
    pub power: f64,
    pub gain: f64,
    pub slot: u64,
}

/// One line per aggregation event.
#[derive(Debug, Clone, Default)]
pub struct AuditLog {
    pub enabled: bool,
    pub lines: Vec<String>,
}

impl AuditLog {
    pub fn local(&mut self, slot: u64, weights: &[(u64, f64)]) {
        if self.enabled {
            let mut line = format!("{slot} local");
            for (id, w) in weights {
                let _ = write!(line, " {id}:{w}");
            }
            self.lines.push(line);
        }
    }

    pub fn global(&mut self, slot: u64, ids: &[u64], version: u64) {
        if self.enabled {
            let mut line = format!("{slot} global v{version}");
            for id in ids {
                let _ = write!(line, " {id}");
            }
            self.lines.push(line);
        }
    }
}
