use std::fmt;
use std::str::FromStr;

use crate::autonet::SgdConfig;
use crate::dataio::AugmentConfig;
use crate::enhance::EnhanceMethod;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Approach {
    /// RGB-only classifier.
    Baseline,
    /// One dynamic filter trained jointly with the classifier.
    A1,
    /// Fixed mean filters per method plus RGB, classifier only.
    A2,
    /// One dynamic filter per method plus RGB, all trained jointly.
    A3,
}

impl Approach {
    pub fn name(self) -> &'static str {
        match self {
            Approach::Baseline => "baseline",
            Approach::A1 => "a1",
            Approach::A2 => "a2",
            Approach::A3 => "a3",
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" | "fc" | "rgb" => Ok(Approach::Baseline),
            "a1" => Ok(Approach::A1),
            "a2" | "stat" => Ok(Approach::A2),
            "a3" | "dyn" => Ok(Approach::A3),
            _ => Err(Error::param(format!("unknown approach {s:?} (expected baseline, a1, a2 or a3)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    Equal,
    Mse,
}

impl Weighting {
    pub fn name(self) -> &'static str {
        match self {
            Weighting::Equal => "equal",
            Weighting::Mse => "mse",
        }
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "equal" => Ok(Weighting::Equal),
            "mse" => Ok(Weighting::Mse),
            _ => Err(Error::param(format!("unknown weighting {s:?} (expected equal or mse)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub approach: Approach,
    pub methods: Vec<EnhanceMethod>,
    pub weighting: Weighting,
    pub filter_size: usize,
    /// Epochs of RGB-only classifier training before the joint phase.
    pub pretrain_epochs: usize,
    /// Epochs of the joint phase.
    pub epochs: usize,
    pub batch_size: usize,
    pub class_sgd: SgdConfig,
    pub enhance_sgd: SgdConfig,
    /// Joint-phase learning-rate multiplier of the classifier body.
    pub body_lr_mult: f64,
    /// Joint-phase learning-rate multiplier of the last two fc layers.
    pub head_lr_mult: f64,
    pub augment: AugmentConfig,
    /// Include the reconstruction (MSE) terms in the loss.
    pub mse_term: bool,
    /// Intensity scale the reconstruction error is measured on: the loss
    /// uses `mse_scale * mse` with `mse` computed on `[0, 1]` planes.
    pub mse_scale: f64,
    pub seed: u64,
    /// Samples processed concurrently inside a batch.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            approach: Approach::A3,
            methods: EnhanceMethod::ALL.to_vec(),
            weighting: Weighting::Mse,
            filter_size: 6,
            pretrain_epochs: 10,
            epochs: 10,
            batch_size: 16,
            class_sgd: SgdConfig::default(),
            enhance_sgd: SgdConfig { learning_rate: 1e-6, ..SgdConfig::default() },
            body_lr_mult: 0.1,
            head_lr_mult: 1.0,
            augment: AugmentConfig::default(),
            mse_term: true,
            mse_scale: 255.0 * 255.0,
            seed: 7,
            threads: 1,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.class_sgd.validate()?;
        self.enhance_sgd.validate()?;
        if self.batch_size == 0 || self.threads == 0 {
            return Err(Error::param("batch size and thread count must be positive"));
        }
        if !(self.mse_scale > 0.0 && self.mse_scale.is_finite()) {
            return Err(Error::param(format!("mse scale must be positive, got {}", self.mse_scale)));
        }
        if !(self.body_lr_mult >= 0.0 && self.head_lr_mult >= 0.0) {
            return Err(Error::param("learning-rate multipliers must be non-negative"));
        }
        let mut distinct = self.methods.clone();
        distinct.sort_by_key(|m| m.index());
        distinct.dedup();
        if distinct.len() != self.methods.len() {
            return Err(Error::param("methods must be distinct"));
        }
        match self.approach {
            Approach::A1 if self.methods.len() != 1 => {
                Err(Error::param(format!("approach a1 needs exactly one method, got {}", self.methods.len())))
            }
            Approach::A2 | Approach::A3 if self.methods.len() < 2 => {
                Err(Error::param(format!("approach {} needs at least two methods", self.approach)))
            }
            _ => Ok(()),
        }
    }
}
