//! Uplink channel: distance path loss, AR(1) log-normal shadowing, first-order
//! Gauss-Markov (Jakes) Rayleigh fading and SINR-based Shannon rates.
//!
//! All gains in the SINR are power gains, `10^(-(PL + chi)/10) * |h|^2`.

use std::f64::consts::PI;
use std::ops::{Add, Mul};

use crate::config::ScenarioConfig;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const ZERO: Complex = Complex { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    /// `self * conj(other)`.
    pub fn mul_conj(self, other: Complex) -> Complex {
        Complex::new(
            self.re * other.re + self.im * other.im,
            self.im * other.re - self.re * other.im,
        )
    }
}

impl Add for Complex {
    type Output = Complex;
    fn add(self, rhs: Complex) -> Complex {
        Complex::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl Mul<f64> for Complex {
    type Output = Complex;
    fn mul(self, rhs: f64) -> Complex {
        Complex::new(self.re * rhs, self.im * rhs)
    }
}

/// Zeroth-order Bessel function of the first kind.
///
/// Power series for `|x| <= 12`, Hankel asymptotic expansion beyond. Both
/// branches hold roughly 1e-11 absolute accuracy at the switch point and
/// improve away from it.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= 12.0 {
        let q = -(x * x) / 4.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= q / (k * k);
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
            k += 1.0;
            if k > 200.0 {
                break;
            }
        }
        sum
    } else {
        // t_n = prod_{j<=n} (2j-1)^2 / (n! 8^n x^n); P alternates even terms,
        // Q alternates odd terms, J0 = sqrt(2/(pi x)) (P cos w + Q sin w).
        let mut p = 1.0;
        let mut q = 0.0;
        let mut t = 1.0;
        let mut prev = f64::INFINITY;
        for n in 1..200 {
            let nf = n as f64;
            let odd = 2.0 * nf - 1.0;
            t *= odd * odd / (8.0 * nf * x);
            if t >= prev || t < 1e-18 {
                break;
            }
            prev = t;
            let sign = if (n / 2) % 2 == 0 { 1.0 } else { -1.0 };
            if n % 2 == 1 {
                q += sign * t;
            } else {
                p += sign * t;
            }
        }
        let w = x - PI / 4.0;
        (2.0 / (PI * x)).sqrt() * (p * w.cos() + q * w.sin())
    }
}

/// 28 GHz line-of-sight path loss in dB; distances below 1 m are clamped.
pub fn path_loss_db(distance: f64) -> f64 {
    61.4 + 20.0 * distance.max(1.0).log10()
}

pub fn doppler_hz(speed: f64, carrier: f64, lightspeed: f64) -> f64 {
    speed * carrier / lightspeed
}

/// Shadowing correlation over a displacement of `delta` metres.
pub fn shadow_correlation(delta: f64, decorrelation: f64) -> f64 {
    (-delta / decorrelation).exp()
}

/// One AR(1) shadowing step with an explicit innovation `e ~ N(0,1)`.
pub fn shadow_update(chi: f64, delta: f64, decorrelation: f64, sigma: f64, e: f64) -> f64 {
    shadow_correlation(delta, decorrelation) * chi + sigma * e
}

/// Fading correlation `J0(2 pi f_d tau)`.
pub fn fading_correlation(doppler: f64, slot: f64) -> f64 {
    bessel_j0(2.0 * PI * doppler * slot)
}

pub fn channel_power_gain(shadow_db: f64, path_loss_db: f64, h: Complex) -> f64 {
    10f64.powf(-(path_loss_db + shadow_db) / 10.0) * h.norm_sqr()
}

/// Per-vehicle channel state.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub shadow_db: f64,
    pub rayleigh: Complex,
    pub last_position: (f64, f64),
    pub doppler: f64,
    /// Cached `J0(2 pi f_d tau)` for `doppler`.
    rho: f64,
}

impl ChannelState {
    /// Fresh state at spawn: `chi ~ N(0, sigma_s^2)`, `h ~ CN(0, 1)`.
    pub fn spawn(
        position: (f64, f64),
        speed: f64,
        cfg: &ScenarioConfig,
        rng: &mut RngStream,
    ) -> Self {
        let shadow_db = cfg.shadow_sigma * rng.normal();
        let rayleigh = rng.complex_normal(1.0);
        let doppler = doppler_hz(speed, cfg.carrier, cfg.lightspeed);
        Self {
            shadow_db,
            rayleigh,
            last_position: position,
            doppler,
            rho: fading_correlation(doppler, cfg.slot),
        }
    }

    pub fn with_values(
        shadow_db: f64,
        rayleigh: Complex,
        position: (f64, f64),
        doppler: f64,
        slot: f64,
    ) -> Self {
        Self {
            shadow_db,
            rayleigh,
            last_position: position,
            doppler,
            rho: fading_correlation(doppler, slot),
        }
    }

    pub fn fading_rho(&self) -> f64 {
        self.rho
    }

    /// Advances shadowing to `new_position`.
    pub fn step_shadowing(
        &mut self,
        new_position: (f64, f64),
        cfg: &ScenarioConfig,
        rng: &mut RngStream,
    ) -> f64 {
        let dx = new_position.0 - self.last_position.0;
        let dy = new_position.1 - self.last_position.1;
        let delta = (dx * dx + dy * dy).sqrt();
        let e = rng.normal();
        self.shadow_db = shadow_update(
            self.shadow_db,
            delta,
            cfg.decorrelation,
            cfg.shadow_sigma,
            e,
        );
        self.last_position = new_position;
        self.shadow_db
    }

    /// Advances small-scale fading by one slot at `speed`.
    pub fn step_rayleigh(
        &mut self,
        speed: f64,
        cfg: &ScenarioConfig,
        rng: &mut RngStream,
    ) -> Complex {
        let fd = doppler_hz(speed, cfg.carrier, cfg.lightspeed);
        if fd != self.doppler {
            self.doppler = fd;
            self.rho = fading_correlation(fd, cfg.slot);
        }
        let rho = self.rho;
        let innovation_var = (1.0 - rho * rho).max(0.0);
        // draws happen even when the variance is zero so the stream stays aligned
        let q = rng.complex_normal(innovation_var);
        self.rayleigh = self.rayleigh * rho + q;
        self.rayleigh
    }

    /// Power gain towards the RSU at `rsu`.
    pub fn gain(&self, rsu: (f64, f64)) -> f64 {
        let d = distance(self.last_position, rsu);
        channel_power_gain(self.shadow_db, path_loss_db(d), self.rayleigh)
    }
}

pub fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Shannon uplink rates (bit/s) for every task-offloading vehicle under
/// mutual interference plus the interference of model-upload transmissions.
///
/// With empty upload slices this is the plain interference-limited rate.
pub fn compute_rates(
    task_powers: &[f64],
    gains: &[f64],
    upload_powers: &[f64],
    upload_gains: &[f64],
    bandwidth: f64,
    noise: f64,
) -> Vec<f64> {
    assert_eq!(task_powers.len(), gains.len(), "one gain per task power");
    assert_eq!(
        upload_powers.len(),
        upload_gains.len(),
        "one gain per upload power"
    );
    let upload: f64 = upload_powers
        .iter()
        .zip(upload_gains)
        .map(|(p, g)| p * g)
        .sum();
    (0..task_powers.len())
        .map(|i| {
            let signal = gains[i] * task_powers[i];
            let mut interference = 0.0;
            for j in 0..task_powers.len() {
                if j != i {
                    interference += gains[j] * task_powers[j];
                }
            }
            bandwidth * (1.0 + signal / (interference + upload + noise)).log2()
        })
        .collect()
}
