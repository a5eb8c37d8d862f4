use std::collections::HashMap;

use crate::error::{Error, Result};

use super::param::ParamSet;
use super::real::Real;
use super::tape::NamedGrads;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected adaptive moment estimation. Moments start at zero and are
/// kept per parameter name.
#[derive(Debug, Clone)]
pub struct Adam<F> {
    config: AdamConfig,
    step: u64,
    moments: HashMap<String, (Vec<F>, Vec<F>)>,
}

impl<F: Real> Adam<F> {
    pub fn new(config: AdamConfig) -> Result<Self> {
        if !(config.lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", config.lr)));
        }
        if !(0.0..1.0).contains(&config.beta1) || !(0.0..1.0).contains(&config.beta2) {
            return Err(Error::Config("adam betas must lie in [0, 1)".into()));
        }
        Ok(Adam {
            config,
            step: 0,
            moments: HashMap::new(),
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update to every trainable parameter that has a gradient.
    /// Frozen parameters are never written.
    pub fn step(&mut self, params: &mut ParamSet<F>, grads: &NamedGrads<F>) {
        self.step += 1;
        let t = self.step as i32;
        let c = &self.config;
        let b1 = F::from_f64c(c.beta1);
        let b2 = F::from_f64c(c.beta2);
        let one = F::one();
        let lr_t = F::from_f64c(c.lr * (1.0 - c.beta2.powi(t)).sqrt() / (1.0 - c.beta1.powi(t)));
        let eps_t = F::from_f64c(c.eps * (1.0 - c.beta2.powi(t)).sqrt());
        for p in params.iter_mut().filter(|p| p.trainable) {
            let Some(g) = grads.get(&p.name) else { continue };
            let n = g.len();
            let (m, v) = self
                .moments
                .entry(p.name.clone())
                .or_insert_with(|| (vec![F::zero(); n], vec![F::zero(); n]));
            for (((w, gi), mi), vi) in p.tensor.values_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + (one - b1) * *gi;
                *vi = b2 * *vi + (one - b2) * *gi * *gi;
                *w -= lr_t * *mi / (vi.sqrt() + eps_t);
            }
        }
    }
}
