use super::{Matrix, ModelParams, Real};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("non-finite gradient in parameter {name}")]
pub struct NonFiniteGradient {
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: Real,
    pub beta1: Real,
    pub beta2: Real,
    pub epsilon: Real,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First and second moment estimates for every parameter of a registry.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl AdamState {
    pub fn new(params: &ModelParams, config: AdamConfig) -> Self {
        let zeros = || params.iter().map(|p| Matrix::zeros(p.value.rows(), p.value.cols())).collect();
        Self { config, step: 0, first: zeros(), second: zeros() }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update over every parameter, then zeroes the
    /// gradients. Nothing is modified if any gradient is non-finite.
    pub fn step(&mut self, params: &mut ModelParams) -> Result<(), NonFiniteGradient> {
        assert_eq!(self.first.len(), params.len(), "optimizer state does not match registry");
        if let Some(p) = params.iter().find(|p| !p.grad.is_finite()) {
            return Err(NonFiniteGradient { name: p.name.clone() });
        }
        self.step += 1;
        let AdamConfig { learning_rate, beta1, beta2, epsilon } = self.config;
        let t = self.step as i32;
        let correct1 = 1.0 - beta1.powi(t);
        let correct2 = 1.0 - beta2.powi(t);
        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let values = p.value.as_mut_slice();
            let grads = p.grad.as_mut_slice();
            let ms = m.as_mut_slice();
            let vs = v.as_mut_slice();
            for i in 0..values.len() {
                let g = grads[i];
                ms[i] = beta1 * ms[i] + (1.0 - beta1) * g;
                vs[i] = beta2 * vs[i] + (1.0 - beta2) * g * g;
                let m_hat = ms[i] / correct1;
                let v_hat = vs[i] / correct2;
                values[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
                grads[i] = 0.0;
            }
        }
        Ok(())
    }
}

/// Convenience wrapper matching the free-function form.
pub fn adam_step(params: &mut ModelParams, state: &mut AdamState) -> Result<(), NonFiniteGradient> {
    state.step(params)
}
