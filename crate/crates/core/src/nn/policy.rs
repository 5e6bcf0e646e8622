//! Tanh-squashed Gaussian policy over transmit power in `[0, p_max]`.
//!
//! A raw sample `u = mean + exp(log_std) * eps` is mapped to
//! `a = (tanh(u) + 1) / 2 * p_max`. The log-density of `a` is the Gaussian
//! log-density of `u` minus `log(1 - tanh(u)^2)` and `log(p_max / 2)`.

use std::f64::consts::{LN_2, PI};

use crate::rng::RngStream;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Raw actor outputs for one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyHead {
    pub mean: f64,
    /// Unclamped network output; clamped to `[LOG_STD_MIN, LOG_STD_MAX]` on use.
    pub log_std: f64,
}

impl PolicyHead {
    pub fn new(mean: f64, log_std: f64) -> Self {
        Self { mean, log_std }
    }

    pub fn clamped_log_std(&self) -> f64 {
        self.log_std.clamp(LOG_STD_MIN, LOG_STD_MAX)
    }

    fn log_std_active(&self) -> bool {
        self.log_std > LOG_STD_MIN && self.log_std < LOG_STD_MAX
    }
}

/// A sample together with the derivatives needed for reparameterized updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicySample {
    pub action: f64,
    pub log_prob: f64,
    pub raw: f64,
    pub noise: f64,
    /// d action / d mean (equal to d action / d raw).
    pub daction_dmean: f64,
    /// d action / d log_std (zero outside the clamp range).
    pub daction_dlogstd: f64,
    /// d log_prob / d mean with the noise held fixed.
    pub dlogp_dmean: f64,
    /// d log_prob / d log_std with the noise held fixed.
    pub dlogp_dlogstd: f64,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `log(1 - tanh(u)^2)` without cancellation.
pub fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (LN_2 - u - softplus(-2.0 * u))
}

/// Maps a raw sample to power.
pub fn squash(raw: f64, p_max: f64) -> f64 {
    ((raw.tanh() + 1.0) * 0.5 * p_max).clamp(0.0, p_max)
}

/// Deterministic (test-stage) action: the squashed mean.
pub fn deterministic_action(head: PolicyHead, p_max: f64) -> f64 {
    squash(head.mean, p_max)
}

/// Log-density of power `action` under `head`, through the raw value `raw`.
pub fn squashed_log_prob(head: PolicyHead, raw: f64, p_max: f64) -> f64 {
    let log_std = head.clamped_log_std();
    let z = (raw - head.mean) / log_std.exp();
    -0.5 * z * z - log_std - 0.5 * (2.0 * PI).ln() - log_one_minus_tanh_sq(raw) - (p_max / 2.0).ln()
}

/// Reparameterized sample with fixed noise `eps`.
pub fn squashed_from_noise(head: PolicyHead, eps: f64, p_max: f64) -> PolicySample {
    let log_std = head.clamped_log_std();
    let std = log_std.exp();
    let raw = head.mean + std * eps;
    let t = raw.tanh();
    let action = squash(raw, p_max);
    let log_prob = -0.5 * eps * eps
        - log_std
        - 0.5 * (2.0 * PI).ln()
        - log_one_minus_tanh_sq(raw)
        - (p_max / 2.0).ln();
    let active = if head.log_std_active() { 1.0 } else { 0.0 };
    let draw_dlogstd = std * eps * active;
    let da_du = (1.0 - t * t) * 0.5 * p_max;
    let dlogp_du = 2.0 * t;
    PolicySample {
        action,
        log_prob,
        raw,
        noise: eps,
        daction_dmean: da_du,
        daction_dlogstd: da_du * draw_dlogstd,
        dlogp_dmean: dlogp_du,
        dlogp_dlogstd: -active + dlogp_du * draw_dlogstd,
    }
}

pub fn sample_squashed_gaussian(head: PolicyHead, rng: &mut RngStream, p_max: f64) -> PolicySample {
    let eps = rng.normal();
    squashed_from_noise(head, eps, p_max)
}
