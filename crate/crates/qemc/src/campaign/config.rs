//! Campaign configuration: one JSON document per campaign, validated
//! strictly (unknown keys rejected) before any computation starts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("config validation: {0}")]
    Invalid(String),
}

/// Inclusive numeric grid.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Grid {
    pub fn new(min: f64, max: f64, step: f64) -> Self {
        Self { min, max, step }
    }

    pub fn values(&self) -> Vec<f64> {
        let count = ((self.max - self.min) / self.step).round() as usize;
        (0..=count).map(|k| self.min + k as f64 * self.step).collect()
    }

    fn validate(&self, name: &str) -> Result<(), ConfigError> {
        if !(self.step > 0.0 && self.max >= self.min) {
            return Err(ConfigError::Invalid(format!(
                "{name}: need step > 0 and max >= min, got {self:?}"
            )));
        }
        Ok(())
    }
}

fn d_instances() -> usize {
    100
}
fn d_temperature() -> f64 {
    1.0
}
fn d_gamma() -> f64 {
    0.45
}
fn d_t() -> f64 {
    12.0
}
fn d_dt() -> f64 {
    0.8
}
fn d_chis() -> Vec<usize> {
    vec![2, 4, 8]
}
fn d_depths() -> Vec<usize> {
    vec![5, 20, 50]
}
fn d_theta_points() -> usize {
    101
}
fn d_tau() -> f64 {
    12.0
}
fn d_steps() -> usize {
    16
}
fn d_budget() -> usize {
    crate::schedopt::DEFAULT_BO_BUDGET
}
fn d_hit_t_max() -> f64 {
    60.0
}
fn d_hit_threshold() -> f64 {
    0.01
}
fn d_phase_temperature() -> f64 {
    0.05
}
fn d_chain_steps() -> usize {
    10_000
}

/// Parameters shared by all campaigns. Sizes default per experiment when
/// empty. The quick profile (20 instances, n <= 7) is applied after
/// parsing.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(default)]
    pub sizes: Vec<usize>,
    #[serde(default = "d_instances")]
    pub instances: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "d_temperature")]
    pub temperature: f64,
    #[serde(default = "d_gamma")]
    pub gamma: f64,
    #[serde(default = "d_t")]
    pub t: f64,
    #[serde(default = "d_dt")]
    pub dt: f64,
    #[serde(default = "d_chis")]
    pub chis: Vec<usize>,
    #[serde(default)]
    pub gamma_grid: Option<Grid>,
    #[serde(default)]
    pub t_grid: Option<Grid>,
    #[serde(default)]
    pub dt_grid: Option<Grid>,
    #[serde(default)]
    pub temperature_grid: Option<Grid>,
    #[serde(default = "d_depths")]
    pub qaoa_depths: Vec<usize>,
    #[serde(default = "d_theta_points")]
    pub theta_points: usize,
    #[serde(default = "d_tau")]
    pub tau: f64,
    #[serde(default = "d_steps")]
    pub steps: usize,
    #[serde(default = "d_budget")]
    pub bo_budget: usize,
    #[serde(default = "d_hit_threshold")]
    pub hit_threshold: f64,
    #[serde(default = "d_hit_t_max")]
    pub hit_t_max: f64,
    /// Low-temperature proxy for the "zero temperature" crossing analysis.
    #[serde(default = "d_phase_temperature")]
    pub phase_temperature: f64,
    #[serde(default = "d_chain_steps")]
    pub chain_steps: usize,
    /// Worker threads; 0 means the number of available cores.
    #[serde(default)]
    pub jobs: usize,
    #[serde(default)]
    pub quick: bool,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

impl CampaignConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let config: Self = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.instances == 0 {
            return Err(ConfigError::Invalid("instances must be positive".into()));
        }
        if self.temperature <= 0.0 {
            return Err(ConfigError::Invalid("temperature must be positive".into()));
        }
        for &n in &self.sizes {
            if !(crate::instances::MIN_SPINS..=crate::instances::MAX_SPINS).contains(&n) {
                return Err(ConfigError::Invalid(format!("size {n} out of supported range")));
            }
        }
        if self.chis.iter().any(|&c| c == 0) {
            return Err(ConfigError::Invalid("bond dimensions must be positive".into()));
        }
        for (grid, name) in [
            (&self.gamma_grid, "gamma_grid"),
            (&self.t_grid, "t_grid"),
            (&self.dt_grid, "dt_grid"),
            (&self.temperature_grid, "temperature_grid"),
        ] {
            if let Some(g) = grid {
                g.validate(name)?;
            }
        }
        Ok(())
    }

    /// CI profile: 20 instances and sizes capped at 7.
    pub fn apply_quick(&mut self) {
        self.quick = true;
        self.instances = self.instances.min(20);
        self.sizes.retain(|&n| n <= 7);
    }

    /// Sizes to run, falling back to the given default when unset (already
    /// capped when quick).
    pub fn sizes_or(&self, default: &[usize]) -> Vec<usize> {
        let mut sizes = if self.sizes.is_empty() { default.to_vec() } else { self.sizes.clone() };
        if self.quick {
            sizes.retain(|&n| n <= 7);
        }
        sizes
    }

    /// Deterministic seed of the k-th instance of the ensemble.
    pub fn instance_seed(&self, index: usize) -> u64 {
        self.base_seed.wrapping_add(index as u64)
    }

    /// FNV-1a hash of the canonical JSON used to detect config drift on
    /// campaign resume.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf29ce484222325;
        for b in json.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}
