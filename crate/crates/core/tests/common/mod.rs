#![allow(dead_code)]

use vec_offload::nn::ParamVector;

/// `J0(x) = (1/pi) * integral_0^pi cos(x sin t) dt` by the trapezoid rule,
/// which converges geometrically for this periodic integrand.
pub fn bessel_j0_quadrature(x: f64) -> f64 {
    let n = 20_000;
    let h = std::f64::consts::PI / n as f64;
    let mut acc = 0.5 * (1.0 + (x * std::f64::consts::PI.sin()).cos());
    for k in 1..n {
        acc += (x * (k as f64 * h).sin()).cos();
    }
    acc * h / std::f64::consts::PI
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Central finite-difference gradient of `loss` with respect to every entry of `params`.
pub fn fd_gradient(
    params: &ParamVector,
    step: f64,
    mut loss: impl FnMut(&ParamVector) -> f64,
) -> Vec<f64> {
    let flat = params.flatten();
    let mut out = Vec::with_capacity(flat.len());
    let mut probe = flat.clone();
    for i in 0..flat.len() {
        probe[i] = flat[i] + step;
        let up = loss(&params.unflatten(&probe).unwrap());
        probe[i] = flat[i] - step;
        let down = loss(&params.unflatten(&probe).unwrap());
        probe[i] = flat[i];
        out.push((up - down) / (2.0 * step));
    }
    out
}

/// Largest relative error between analytic and numeric gradients. Entries
/// where both are below `floor` in magnitude are compared against `floor`.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

pub mod aggregation;
pub mod channel_stats;
pub mod gradients;
pub mod oracles;
