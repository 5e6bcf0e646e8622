use super::params::ParamVector;

/// Adam optimizer state for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn for_params(params: &ParamVector, lr: f64) -> Self {
        Self::new(params.len(), lr)
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// One bias-corrected Adam descent step on `params`.
    pub fn step(&mut self, params: &mut ParamVector, grads: &ParamVector) {
        assert!(
            params.same_shape(grads),
            "gradient shape differs from parameters"
        );
        assert_eq!(
            params.len(),
            self.m.len(),
            "optimizer state sized for another network"
        );
        self.step += 1;
        let (c1, c2) = self.corrections();
        let mut offset = 0;
        for (p, g) in params.slices_mut().zip(grads.slices()) {
            let n = p.len();
            self.update(&mut p[..], g, offset, c1, c2);
            offset += n;
        }
    }

    /// Step on a plain slice (e.g. a scalar log-temperature).
    pub fn step_slice(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(
            params.len(),
            self.m.len(),
            "optimizer state sized for another parameter set"
        );
        self.step += 1;
        let (c1, c2) = self.corrections();
        self.update(params, grads, 0, c1, c2);
    }

    fn corrections(&self) -> (f64, f64) {
        let t = self.step as i32;
        (1.0 - self.beta1.powi(t), 1.0 - self.beta2.powi(t))
    }

    fn update(&mut self, p: &mut [f64], g: &[f64], offset: usize, c1: f64, c2: f64) {
        for (k, (pk, gk)) in p.iter_mut().zip(g).enumerate() {
            let m = &mut self.m[offset + k];
            let v = &mut self.v[offset + k];
            *m = self.beta1 * *m + (1.0 - self.beta1) * gk;
            *v = self.beta2 * *v + (1.0 - self.beta2) * gk * gk;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *pk -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}
