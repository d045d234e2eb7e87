use serde::{Deserialize, Serialize};

use super::model::{BofModel, Gradients};
use super::BofError;

/// Adam with decoupled weight decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamW {
    fn default() -> Self {
        AdamW { beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.01 }
    }
}

/// First and second moment accumulators of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Moments {
    pub fn zeros(n: usize) -> Self {
        Moments { m: vec![0.0; n], v: vec![0.0; n] }
    }
}

/// One update of `params` at step `t` (1-based).
pub fn adamw_step(
    params: &mut [f64],
    grads: &[f64],
    moments: &mut Moments,
    t: u64,
    lr: f64,
    cfg: &AdamW,
) -> Result<(), BofError> {
    for len in [grads.len(), moments.m.len(), moments.v.len()] {
        if len != params.len() {
            return Err(BofError::Shape { expected: params.len(), found: len });
        }
    }
    let c1 = 1.0 - cfg.beta1.powf(t as f64);
    let c2 = 1.0 - cfg.beta2.powf(t as f64);
    for (k, p) in params.iter_mut().enumerate() {
        let g = grads[k];
        *p -= lr * cfg.weight_decay * *p;
        let m = &mut moments.m[k];
        let v = &mut moments.v[k];
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + cfg.eps);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub adamw: AdamW,
    pub step: u64,
    pub embeddings: Moments,
    pub weight: Moments,
    pub bias: Moments,
}

impl OptimizerState {
    pub fn new(model: &BofModel, adamw: AdamW) -> Self {
        OptimizerState {
            adamw,
            step: 0,
            embeddings: Moments::zeros(model.embeddings.len()),
            weight: Moments::zeros(model.weight.len()),
            bias: Moments::zeros(model.bias.len()),
        }
    }

    pub fn apply(&mut self, model: &mut BofModel, grads: &Gradients, lr: f64) -> Result<(), BofError> {
        self.step += 1;
        let t = self.step;
        adamw_step(&mut model.embeddings, &grads.embeddings, &mut self.embeddings, t, lr, &self.adamw)?;
        adamw_step(&mut model.weight, &grads.weight, &mut self.weight, t, lr, &self.adamw)?;
        adamw_step(&mut model.bias, &grads.bias, &mut self.bias, t, lr, &self.adamw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_without_decay_is_identity() {
        let cfg = AdamW { weight_decay: 0.0, ..AdamW::default() };
        let mut p = vec![1.5, -2.0];
        let mut m = Moments::zeros(2);
        adamw_step(&mut p, &[0.0, 0.0], &mut m, 1, 0.1, &cfg).unwrap();
        assert_eq!(p, [1.5, -2.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = AdamW { weight_decay: 0.0, ..AdamW::default() };
        let mut p = vec![1.0];
        let mut m = Moments::zeros(1);
        adamw_step(&mut p, &[1.0], &mut m, 1, 0.1, &cfg).unwrap();
        // m̂ = v̂ = 1
        assert!((p[0] - (1.0 - 0.1 / (1.0 + 1e-8))).abs() < 1e-15);
    }

    #[test]
    fn decoupled_decay() {
        let cfg = AdamW { weight_decay: 0.5, ..AdamW::default() };
        let mut p = vec![2.0];
        let mut m = Moments::zeros(1);
        adamw_step(&mut p, &[0.0], &mut m, 1, 0.1, &cfg).unwrap();
        assert!((p[0] - 2.0 * (1.0 - 0.1 * 0.5)).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let mut m = Moments::zeros(1);
        assert!(adamw_step(&mut [1.0], &[1.0, 2.0], &mut m, 1, 0.1, &AdamW::default()).is_err());
    }
}
