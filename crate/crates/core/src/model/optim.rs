use serde::{Deserialize, Serialize};

use crate::nn::{Param, Scalar, Tensor2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled weight decay, applied as `θ -= lr · wd · θ`.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Adaptive moment estimation with bias correction.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Tensor2<T>>,
    v: Vec<Tensor2<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Update `params` in place from their accumulated gradients. The
    /// parameter list must have the same order and shapes on every call.
    pub fn step(&mut self, params: &mut [&mut Param<T>]) {
        if self.m.is_empty() {
            self.m = params
                .iter()
                .map(|p| Tensor2::zeros(p.value.rows(), p.value.cols()))
                .collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let c = &self.config;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let bc1 = T::of(1.0 - c.beta1.powi(self.step as i32));
        let bc2 = T::of(1.0 - c.beta2.powi(self.step as i32));
        let lr = T::of(c.lr);
        let eps = T::of(c.eps);
        let decay = T::of(c.lr * c.weight_decay);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let grads = p.grad.data().to_vec();
            let values = p.value.data_mut();
            for (((x, &g), mi), vi) in values
                .iter_mut()
                .zip(&grads)
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = b1 * *mi + (T::one() - b1) * g;
                *vi = b2 * *vi + (T::one() - b2) * g * g;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *x = *x - decay * *x - lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}
