//! Long-run statistics of one vehicle's channel.

use vec_offload::channel::{self, ChannelState};
use vec_offload::config::ScenarioConfig;
use vec_offload::rng::RngStream;

#[derive(Debug, Clone, Copy)]
pub struct ChannelStats {
    pub mean_power: f64,
    /// `Re E[h_t conj(h_{t+k})] / E|h|^2` for `k = 1..=10`.
    pub fading_lags: [f64; 10],
    pub shadow_lag1: f64,
    /// Expected fading lag-1 correlation, from the quadrature oracle.
    pub fading_expected: f64,
    /// Expected shadowing lag-1 correlation, `exp(-v tau / d_cor)`.
    pub shadow_expected: f64,
}

/// Steps a channel `steps` times at `speed` along a straight lane.
pub fn run(speed: f64, steps: usize, seed: u64) -> ChannelStats {
    let cfg = ScenarioConfig::default();
    let mut rng = RngStream::new(seed);
    let mut ch = ChannelState::spawn((0.0, 0.0), speed, &cfg, &mut rng);
    let mut h = Vec::with_capacity(steps);
    let mut chi = Vec::with_capacity(steps);
    let mut x = 0.0;
    for _ in 0..steps {
        x += speed * cfg.slot;
        chi.push(ch.step_shadowing((x, 0.0), &cfg, &mut rng));
        h.push(ch.step_rayleigh(speed, &cfg, &mut rng));
    }
    let n = steps as f64;
    let mean_power = h.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
    let mut fading_lags = [0.0; 10];
    for (k, slot) in fading_lags.iter_mut().enumerate() {
        let lag = k + 1;
        let acc: f64 = (0..steps - lag).map(|t| h[t].mul_conj(h[t + lag]).re).sum();
        *slot = acc / (steps - lag) as f64 / mean_power;
    }
    let mu = chi.iter().sum::<f64>() / n;
    let var = chi.iter().map(|c| (c - mu).powi(2)).sum::<f64>() / n;
    let cov = (0..steps - 1)
        .map(|t| (chi[t] - mu) * (chi[t + 1] - mu))
        .sum::<f64>()
        / (n - 1.0);
    let fd = channel::doppler_hz(speed, cfg.carrier, cfg.lightspeed);
    ChannelStats {
        mean_power,
        fading_lags,
        shadow_lag1: cov / var,
        fading_expected: super::bessel_j0_quadrature(2.0 * std::f64::consts::PI * fd * cfg.slot),
        shadow_expected: (-speed * cfg.slot / cfg.decorrelation).exp(),
    }
}
