use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::channel::Complex;

/// Seeded random stream. Equal seeds give equal draw sequences.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream; the parent advances by one draw.
    pub fn fork(&mut self) -> Self {
        Self::new(self.inner.random())
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        if lo == hi {
            // still consume a draw so degenerate ranges keep the stream aligned
            let _ = self.uniform();
            return lo;
        }
        lo + (hi - lo) * self.uniform()
    }

    pub fn index(&mut self, len: usize) -> usize {
        self.inner.random_range(0..len)
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Exponential draw with the given mean; `inf` for a zero rate.
    pub fn exponential(&mut self, mean: f64) -> f64 {
        if !(mean.is_finite()) || mean <= 0.0 {
            return f64::INFINITY;
        }
        Exp::new(1.0 / mean)
            .expect("positive rate")
            .sample(&mut self.inner)
    }

    /// Circularly-symmetric complex Gaussian with total variance `var`.
    pub fn complex_normal(&mut self, var: f64) -> Complex {
        let s = (var / 2.0).sqrt();
        Complex::new(s * self.normal(), s * self.normal())
    }
}
