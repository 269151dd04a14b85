//! AdamW with decoupled weight decay, and the warmup + cosine schedule.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, NnError, Result};
use crate::model::Param;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub peak_lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub warmup_epochs: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub label_smoothing: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { peak_lr: 1e-4, batch_size: 128, epochs: 30, warmup_epochs: 1.5, weight_decay: 0.01, seed: 0, label_smoothing: 0.0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.peak_lr) || self.batch_size == 0 || self.epochs == 0 {
            return Err(NnError::InvalidArgument("peak_lr, batch_size and epochs must be positive".into()));
        }
        if !(self.warmup_epochs >= 0.0 && self.weight_decay >= 0.0 && (0.0..1.0).contains(&self.label_smoothing)) {
            return Err(NnError::InvalidArgument("warmup, weight decay or label smoothing out of range".into()));
        }
        Ok(())
    }

    pub fn warmup_steps(&self, steps_per_epoch: usize) -> usize {
        (self.warmup_epochs * steps_per_epoch as f64).round() as usize
    }

    pub fn total_steps(&self, steps_per_epoch: usize) -> usize {
        self.epochs * steps_per_epoch
    }
}

/// Learning rate at a 0-based optimizer step: linear warmup from 0 to the
/// peak, then cosine decay reaching 0 at the last step of the last epoch.
pub fn lr_at(step: usize, steps_per_epoch: usize, config: &TrainConfig) -> f64 {
    let warmup = config.warmup_steps(steps_per_epoch);
    let total = config.total_steps(steps_per_epoch);
    if step < warmup {
        return config.peak_lr * step as f64 / warmup as f64;
    }
    let span = total.saturating_sub(1).saturating_sub(warmup);
    if span == 0 {
        return config.peak_lr;
    }
    let progress = ((step - warmup) as f64 / span as f64).min(1.0);
    config.peak_lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(params: &[Param], weight_decay: f64) -> Self {
        let zeros = || params.iter().map(|p| vec![0.0; p.value.len()]).collect();
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, step: 0, m: zeros(), v: zeros() }
    }

    /// One update. A non-finite gradient aborts the step before anything changes.
    pub fn step(&mut self, params: &mut [Param], grads: &[Vec<f64>], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(shape_err("AdamW::step", self.m.len(), (params.len(), grads.len())));
        }
        for (p, g) in params.iter().zip(grads) {
            if g.len() != p.value.len() {
                return Err(shape_err("AdamW::step", p.value.len(), g.len()));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(NnError::NonFiniteGradient(p.name.clone()));
            }
        }
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for i in 0..g.len() {
                let w = &mut p.value.data[i];
                *w -= lr * self.weight_decay * *w;
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                *w -= lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn scalar_param(v: f64) -> Vec<Param> {
        vec![Param { name: "w".into(), value: Tensor::scalar(v) }]
    }

    #[test]
    fn schedule_endpoints() {
        let c = TrainConfig::default();
        let spe = 10;
        assert_eq!(lr_at(0, spe, &c), 0.0);
        assert_eq!(lr_at(15, spe, &c), 1e-4);
        assert!((lr_at(7, spe, &c) - 1e-4 * 7.0 / 15.0).abs() < 1e-18);
        assert!(lr_at(299, spe, &c) <= 1e-9 * 1e-4);
        let mut prev = f64::INFINITY;
        for s in 15..300 {
            let lr = lr_at(s, spe, &c);
            assert!(lr <= prev);
            prev = lr;
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op_without_decay() {
        let mut p = scalar_param(0.7);
        let mut opt = AdamW::new(&p, 0.0);
        opt.step(&mut p, &[vec![0.0]], 1e-3).unwrap();
        assert_eq!(p[0].value.data[0], 0.7);
    }

    #[test]
    fn decay_alone_shrinks_multiplicatively() {
        let mut p = scalar_param(2.0);
        let mut opt = AdamW::new(&p, 0.1);
        opt.step(&mut p, &[vec![0.0]], 0.5).unwrap();
        assert_eq!(p[0].value.data[0], 2.0 * (1.0 - 0.5 * 0.1));
    }

    #[test]
    fn first_step_closed_form() {
        // m̂ = g, v̂ = g² after bias correction, so Δ = −lr·g/(|g| + ε)
        let mut p = scalar_param(0.0);
        let mut opt = AdamW::new(&p, 0.0);
        opt.step(&mut p, &[vec![1.0]], 1e-3).unwrap();
        let want = -1e-3 / (1.0 + 1e-8);
        assert!((p[0].value.data[0] - want).abs() < 1e-17, "{}", p[0].value.data[0]);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut p = scalar_param(1.0);
        let mut opt = AdamW::new(&p, 0.01);
        assert!(matches!(opt.step(&mut p, &[vec![f64::NAN]], 1e-3), Err(NnError::NonFiniteGradient(_))));
        assert_eq!(p[0].value.data[0], 1.0);
        assert_eq!(opt.step, 0);
    }
}
