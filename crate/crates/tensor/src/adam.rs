//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use crate::{Array, TensorError};

/// Optimizer state. Moment buffers are bound to parameters by position in
/// the slice passed to [`Adam::step`]; pass the same parameters in the same
/// order every call.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Self::with_betas(learning_rate, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self { learning_rate, beta1, beta2, epsilon, step: 0, first: Vec::new(), second: Vec::new() }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update to every parameter from its accumulated gradient,
    /// then zeroes the gradients.
    pub fn step(&mut self, params: &mut [&mut Array]) -> Result<(), TensorError> {
        if params.iter().any(|p| p.grad().is_none()) {
            return Err(TensorError::MissingGrad);
        }
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.second = self.first.clone();
        }
        if self.first.len() != params.len() || self.first.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len()) {
            return Err(TensorError::OptimizerLayout);
        }

        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        let lr = self.learning_rate;

        for ((param, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let grad = param.grad().expect("checked above").to_vec();
            let values = param.data_mut();
            for i in 0..values.len() {
                let g = grad[i];
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                values[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
            param.zero_grad();
        }
        Ok(())
    }
}
