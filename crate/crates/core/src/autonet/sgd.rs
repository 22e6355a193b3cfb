use super::params::{Gradients, NetParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self { learning_rate: 0.01, weight_decay: 5e-4, momentum: 0.9, lr_decay_factor: 0.1, lr_decay_every: 15_000 }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param(format!("learning rate must be >= 0, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::param(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if self.weight_decay < 0.0 || self.lr_decay_factor <= 0.0 || self.lr_decay_every == 0 {
            return Err(Error::param("weight decay, decay factor and decay interval must be positive".to_string()));
        }
        Ok(())
    }

    /// Step schedule `lr0 * factor^floor(step / every)`.
    pub fn lr_at(&self, step: usize) -> f64 {
        self.learning_rate * self.lr_decay_factor.powi((step / self.lr_decay_every) as i32)
    }
}

/// SGD with momentum and weight decay, optionally with per-block learning
/// rate multipliers.
#[derive(Debug, Clone)]
pub struct Sgd {
    cfg: SgdConfig,
    velocity: Vec<f64>,
    multipliers: Option<Vec<f64>>,
}

impl Sgd {
    pub fn new(cfg: SgdConfig, params: &NetParams) -> Self {
        Self { cfg, velocity: vec![0.0; params.total_count()], multipliers: None }
    }

    /// One multiplier per layout block, in layout order.
    pub fn with_block_multipliers(mut self, multipliers: Vec<f64>) -> Self {
        self.multipliers = Some(multipliers);
        self
    }

    pub fn config(&self) -> &SgdConfig {
        &self.cfg
    }

    /// `v = momentum * v + g + wd * p; p -= lr(step) * mult * v`.
    pub fn step(&mut self, params: &mut NetParams, grads: &Gradients, step: usize) -> Result<()> {
        if **params.layout() != **grads.layout() || self.velocity.len() != params.total_count() {
            return Err(Error::Layout("optimizer, parameters and gradients disagree on layout".into()));
        }
        let lr = self.cfg.lr_at(step);
        let layout = params.layout().clone();
        let (m, wd) = (self.cfg.momentum, self.cfg.weight_decay);
        let values = params.values_mut();
        for (bi, block) in layout.blocks().iter().enumerate() {
            let mult = self.multipliers.as_ref().map_or(1.0, |v| v[bi]);
            for i in block.offset..block.offset + block.len {
                let v = m * self.velocity[i] + grads.values()[i] + wd * values[i];
                self.velocity[i] = v;
                values[i] -= lr * mult * v;
            }
        }
        Ok(())
    }
}

/// Single stateless step with zero initial velocity.
pub fn sgd_step(params: &NetParams, grads: &Gradients, cfg: &SgdConfig, step: usize) -> Result<NetParams> {
    let mut out = params.clone();
    Sgd::new(cfg.clone(), params).step(&mut out, grads, step)?;
    Ok(out)
}
