//! Resolved run configurations: JSON config file plus flag overrides.
//!
//! Every command resolves to one plain struct, logs it as the first line
//! of its report, and embeds its hash, so identical resolved configs are
//! reproducible byte for byte.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use advobf::attack::{AttackConfig, DiscretizeMode, OptimizerKind};
use advobf::minilang::{Family, GenConfig};
use advobf::summarizer::{ModelConfig, TrainParams};

pub fn parse_optimizer(name: &str) -> Result<OptimizerKind> {
    OptimizerKind::from_name(name).with_context(|| {
        format!(
            "unknown optimizer {name:?} (expected one of: random, jo, ao, jo_rs, ao_rs, baseline)"
        )
    })
}

pub fn parse_mode(name: &str) -> Result<DiscretizeMode> {
    match name {
        "randomized" => Ok(DiscretizeMode::Randomized),
        "argmax" => Ok(DiscretizeMode::Argmax),
        other => anyhow::bail!("unknown discretization mode {other:?}"),
    }
}

pub fn parse_families(csv: &str) -> Result<Vec<Family>> {
    csv.split(',')
        .map(|s| {
            serde_json::from_value(serde_json::Value::String(s.trim().to_string()))
                .with_context(|| format!("unknown family {s:?}"))
        })
        .collect()
}

pub fn load_config<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

macro_rules! override_field {
    ($cfg:expr, $flag:expr) => {
        if let Some(v) = $flag {
            $cfg = v;
        }
    };
}
pub(crate) use override_field;

/// Shared attack knobs used by attack, sweep, and advtrain.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackKnobs {
    pub optimizer: String,
    pub k: usize,
    pub iters: Option<usize>,
    pub alpha_z: f64,
    pub alpha_u: f64,
    pub inner_z: usize,
    pub inner_u: usize,
    pub mu_s: f64,
    pub mc_samples: usize,
    pub smooth_z: bool,
    pub mode: String,
    pub draws: usize,
    pub restarts: usize,
}

impl Default for AttackKnobs {
    fn default() -> Self {
        AttackKnobs {
            optimizer: "ao_rs".to_string(),
            k: 1,
            iters: None,
            alpha_z: 0.5,
            alpha_u: 0.5,
            inner_z: 10,
            inner_u: 10,
            mu_s: 0.01,
            mc_samples: 10,
            smooth_z: false,
            mode: "randomized".to_string(),
            draws: 10,
            restarts: 1,
        }
    }
}

impl AttackKnobs {
    pub fn to_attack_config(&self, seed: u64) -> Result<AttackConfig> {
        let optimizer = parse_optimizer(&self.optimizer)?;
        let mut config = AttackConfig::new(optimizer, self.k, seed);
        config.iters = self.iters.unwrap_or_else(|| optimizer.default_iters());
        config.alpha_z = self.alpha_z;
        config.alpha_u = self.alpha_u;
        config.inner_z = self.inner_z;
        config.inner_u = self.inner_u;
        config.mu_s = self.mu_s;
        config.mc_samples = self.mc_samples;
        config.smooth_z = self.smooth_z;
        config.mode = parse_mode(&self.mode)?;
        config.draws = self.draws;
        config.restarts = self.restarts;
        Ok(config)
    }
}

/// Training knobs shared by train and advtrain.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainKnobs {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub augment_placeholders: f64,
    pub augment_inserts: usize,
    pub d: usize,
    pub h: usize,
    pub l: usize,
}

impl Default for TrainKnobs {
    fn default() -> Self {
        let t = TrainParams::default();
        let m = ModelConfig::default();
        TrainKnobs {
            epochs: t.epochs,
            batch: t.batch,
            lr: t.lr,
            augment_placeholders: t.augment_placeholders,
            augment_inserts: t.augment_inserts,
            d: m.d,
            h: m.h,
            l: m.l,
        }
    }
}

impl TrainKnobs {
    pub fn to_params(&self, seed: u64) -> (TrainParams, ModelConfig) {
        (
            TrainParams {
                epochs: self.epochs,
                batch: self.batch,
                lr: self.lr,
                seed,
                augment_placeholders: self.augment_placeholders,
                augment_inserts: self.augment_inserts,
            },
            ModelConfig {
                d: self.d,
                h: self.h,
                l: self.l,
            },
        )
    }
}

/// Resolved `gen` run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GenRun {
    pub count: usize,
    pub families: Vec<Family>,
    pub noise: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub vocab_out: Option<PathBuf>,
}

impl Default for GenRun {
    fn default() -> Self {
        GenRun {
            count: 500,
            families: Family::ALL.to_vec(),
            noise: 0.05,
            seed: 7,
            out: PathBuf::from("corpus.jsonl"),
            vocab_out: None,
        }
    }
}

impl GenRun {
    pub fn to_gen_config(&self) -> GenConfig {
        GenConfig {
            count: self.count,
            families: self.families.clone(),
            seed: self.seed,
            noise: self.noise,
        }
    }
}
