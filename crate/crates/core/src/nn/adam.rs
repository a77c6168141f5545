use super::linalg::{avx, avx_dispatch};

#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn update_portable(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], b1: f64, b2: f64, step_size: f64, eps: f64) {
    for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *p -= step_size * *m / (v.sqrt() + eps);
    }
}

avx_dispatch! {
    #[allow(clippy::too_many_arguments)]
    fn update => update_portable, update_avx(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], b1: f64, b2: f64, step_size: f64, eps: f64)
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Updates each parameter tensor from its gradient. Tensors must be
    /// passed in the same order and shapes on every call.
    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>) {
        assert_eq!(params.len(), grads.len(), "adam tensor count");
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        // lr * (m / bc1) / (sqrt(v / bc2) + eps), rearranged
        let step_size = self.learning_rate * bc2.sqrt() / bc1;
        let eps = self.epsilon * bc2.sqrt();
        let (b1, b2) = (self.beta1, self.beta2);
        for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            assert_eq!(p.len(), g.len(), "adam tensor shape");
            update(p, g, m, v, b1, b2, step_size, eps);
        }
    }
}
