//! Comparison schemes.
//!
//! * `gfsac`: vehicles train locally and, after every training round, blend
//!   their model into the RSU store and re-download the result. No local
//!   aggregation.
//! * `lfsac`: local critic aggregation with uniform weights, plus the usual
//!   departure-triggered global averaging. No GNN.
//! * `gdbr`: a game-flavored best-response rule, used as a stand-in for the
//!   game-based scheme. Each vehicle offloads with probability
//!   `q = clamp(head_aoi / max(system_aoi, slot) - kappa * mean(others' q), 0, 1)`
//!   and transmits at `q * p_max`.

use std::fmt;
use std::str::FromStr;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::federated::GlobalModelStore;
use crate::sac::SacModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Fgnn,
    Gfsac,
    Lfsac,
    Gdbr,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Fgnn, Scheme::Gfsac, Scheme::Lfsac, Scheme::Gdbr];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Fgnn => "fgnn",
            Scheme::Gfsac => "gfsac",
            Scheme::Lfsac => "lfsac",
            Scheme::Gdbr => "gdbr",
        }
    }

    /// Whether vehicles run SAC policies.
    pub fn learns(self) -> bool {
        self != Scheme::Gdbr
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown scheme `{s}` (expected fgnn, gfsac, lfsac or gdbr)"
                ))
            })
    }
}

/// Blends `model` into the store and copies the blended networks back.
pub fn gfsac_on_train_complete(store: &mut GlobalModelStore, model: &mut SacModel) -> Result<()> {
    store.blend_with(model)?;
    store.overwrite(model);
    Ok(())
}

/// Offloading probability of one vehicle; `head_aoi` is `None` for an empty queue.
pub fn gdbr_probability(
    head_aoi: Option<f64>,
    system_aoi: f64,
    others_mean: f64,
    cfg: &ScenarioConfig,
) -> f64 {
    match head_aoi {
        None => 0.0,
        Some(a) => {
            let benefit = a / system_aoi.max(cfg.slot);
            (benefit - cfg.gdbr_kappa * others_mean).clamp(0.0, 1.0)
        }
    }
}

/// Probabilities for all vehicles given last slot's probabilities `prev`.
pub fn gdbr_step(
    head_aois: &[Option<f64>],
    prev: &[f64],
    system_aoi: f64,
    cfg: &ScenarioConfig,
) -> Vec<f64> {
    assert_eq!(head_aois.len(), prev.len());
    let n = prev.len();
    let total: f64 = prev.iter().sum();
    (0..n)
        .map(|i| {
            let others = if n > 1 {
                (total - prev[i]) / (n - 1) as f64
            } else {
                0.0
            };
            gdbr_probability(head_aois[i], system_aoi, others, cfg)
        })
        .collect()
}
