//! Layered `key=value` configuration: defaults, then a config file, then
//! command-line overrides.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use dynenh::dataio::{AugmentConfig, SplitRatios};
use dynenh::enhance::{EnhanceMethod, EnhanceParams};
use dynenh::pipeline::{Approach, RunConfig, Weighting};

/// Every accepted key with its default and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("data", "", "dataset root (manifest.csv or one directory per class)"),
    ("cache", "dynenh-cache", "target cache directory"),
    ("approach", "a3", "baseline, a1, a2 or a3"),
    ("methods", "all", "comma-separated subset of bf,wls,gf,histeq,imsharp"),
    ("weighting", "mse", "stream weights: mse or equal"),
    ("filter_size", "6", "dynamic filter extent (5, 6 or 7)"),
    ("pretrain_epochs", "10", "RGB-only classifier epochs before the joint phase"),
    ("epochs", "10", "joint-phase epochs"),
    ("batch_size", "16", "samples per SGD step"),
    ("lr", "0.01", "classifier learning rate"),
    ("enhance_lr", "1e-6", "enhancement network learning rate"),
    ("weight_decay", "0.0005", "L2 weight decay (both optimizers)"),
    ("momentum", "0.9", "SGD momentum (both optimizers)"),
    ("lr_decay_factor", "0.1", "step decay factor"),
    ("lr_decay_every", "15000", "steps between learning-rate decays"),
    ("body_lr_mult", "0.1", "joint-phase lr multiplier of the classifier body"),
    ("head_lr_mult", "1.0", "joint-phase lr multiplier of the last two fc layers"),
    ("mse_term", "true", "include the reconstruction loss"),
    ("mse_scale", "65025", "reconstruction loss scale (255^2: 8-bit intensities)"),
    ("crop_extent", "64", "training crop extent"),
    ("flips", "true", "random horizontal flips"),
    ("jitter", "0", "color jitter strength"),
    ("train_ratio", "0.6", "train fraction of each class"),
    ("val_ratio", "0.2", "validation fraction of each class"),
    ("test_ratio", "0.2", "test fraction of each class"),
    ("split_seed", "7", "seed of the train/val/test split"),
    ("seed", "7", "seed of initialization, shuffling and augmentation"),
    ("threads", "1", "worker threads"),
    ("wls_lambda", "0.125", "WLS smoothness weight"),
    ("wls_alpha", "1.2", "WLS gradient exponent"),
    ("wls_eps", "0.0001", "WLS regularizer"),
    ("detail_boost_c", "1.2", "detail gain of smoothing-based targets"),
    ("bf_sigma_spatial", "0.02", "bilateral spatial sigma, fraction of the diagonal"),
    ("bf_sigma_range", "0.5", "bilateral range sigma, fraction of the luminance std"),
    ("gf_radius", "0.04", "guided filter radius, fraction of the shorter side"),
    ("gf_eps", "0.01", "guided filter regularizer, fraction of the luminance variance"),
    ("sharp_amount", "2", "unsharp mask amount"),
    ("sharp_radius", "1", "unsharp mask Gaussian sigma"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn check_key(key: &str) -> Result<()> {
    if KEYS.iter().any(|(k, _, _)| *k == key) {
        Ok(())
    } else {
        bail!("unknown config key {key:?}")
    }
}

pub fn parse_pair(line: &str) -> Result<(String, String)> {
    let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("expected key=value, got {line:?}"))?;
    let (k, v) = (k.trim(), v.trim());
    check_key(k)?;
    Ok((k.to_string(), v.to_string()))
}

impl Default for Settings {
    fn default() -> Self {
        Self { values: KEYS.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect() }
    }
}

impl Settings {
    /// Applies a config file: one `key=value` per line, `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = parse_pair(line).with_context(|| format!("{}:{}", path.display(), n + 1))?;
            self.values.insert(k, v);
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        check_key(key)?;
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key).parse().map_err(|e| anyhow!("config key {key}: {e}"))
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.get(key).to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" | "on" => Ok(true),
            "false" | "0" | "no" | "off" => Ok(false),
            other => bail!("config key {key}: expected a boolean, got {other:?}"),
        }
    }

    /// The fully resolved configuration, one `key=value` per line, sorted.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn data_dir(&self) -> Result<PathBuf> {
        match self.get("data") {
            "" => bail!("no dataset given (use --data or data= in the config)"),
            d => Ok(PathBuf::from(d)),
        }
    }

    pub fn cache_dir(&self) -> PathBuf {
        PathBuf::from(self.get("cache"))
    }

    pub fn methods(&self) -> Result<Vec<EnhanceMethod>> {
        let spec = self.get("methods");
        if spec.eq_ignore_ascii_case("all") {
            return Ok(EnhanceMethod::ALL.to_vec());
        }
        spec.split(',').map(|m| m.trim().parse::<EnhanceMethod>().map_err(|e| anyhow!("{e}"))).collect()
    }

    pub fn ratios(&self) -> Result<SplitRatios> {
        let r = SplitRatios { train: self.parse("train_ratio")?, val: self.parse("val_ratio")?, test: self.parse("test_ratio")? };
        r.validate()?;
        Ok(r)
    }

    pub fn enhance_params(&self) -> Result<EnhanceParams> {
        let p = EnhanceParams {
            wls_lambda: self.parse("wls_lambda")?,
            wls_alpha: self.parse("wls_alpha")?,
            wls_eps: self.parse("wls_eps")?,
            detail_boost_c: self.parse("detail_boost_c")?,
            bf_sigma_spatial_frac: self.parse("bf_sigma_spatial")?,
            bf_sigma_range_frac: self.parse("bf_sigma_range")?,
            gf_radius_frac: self.parse("gf_radius")?,
            gf_eps_frac: self.parse("gf_eps")?,
            sharp_amount: self.parse("sharp_amount")?,
            sharp_radius: self.parse("sharp_radius")?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn threads(&self) -> Result<usize> {
        let t: usize = self.parse("threads")?;
        if t == 0 {
            bail!("threads must be at least 1");
        }
        Ok(t)
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        let approach: Approach = self.parse("approach")?;
        let weighting: Weighting = self.parse("weighting")?;
        let mut cfg = RunConfig {
            approach,
            methods: self.methods()?,
            weighting,
            filter_size: self.parse("filter_size")?,
            pretrain_epochs: self.parse("pretrain_epochs")?,
            epochs: self.parse("epochs")?,
            batch_size: self.parse("batch_size")?,
            body_lr_mult: self.parse("body_lr_mult")?,
            head_lr_mult: self.parse("head_lr_mult")?,
            augment: AugmentConfig {
                crop_extent: self.parse("crop_extent")?,
                enable_flips: self.flag("flips")?,
                jitter_strength: self.parse("jitter")?,
            },
            mse_term: self.flag("mse_term")?,
            mse_scale: self.parse("mse_scale")?,
            seed: self.parse("seed")?,
            threads: self.threads()?,
            ..RunConfig::default()
        };
        for sgd in [&mut cfg.class_sgd, &mut cfg.enhance_sgd] {
            sgd.weight_decay = self.parse("weight_decay")?;
            sgd.momentum = self.parse("momentum")?;
            sgd.lr_decay_factor = self.parse("lr_decay_factor")?;
            sgd.lr_decay_every = self.parse("lr_decay_every")?;
        }
        cfg.class_sgd.learning_rate = self.parse("lr")?;
        cfg.enhance_sgd.learning_rate = self.parse("enhance_lr")?;
        cfg.validate()?;
        Ok(cfg)
    }
}
