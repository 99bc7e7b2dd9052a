use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MopsError, Result};
use crate::math::WeightSimplex;
use crate::model::Scheme;
use crate::tasks::TaskConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Fixed weights for the whole run.
    Static,
    /// Weights adapted every round from two extra samples per agent.
    Dynamic,
}

impl std::str::FromStr for Algorithm {
    type Err = MopsError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(Algorithm::Static),
            "dynamic" => Ok(Algorithm::Dynamic),
            other => Err(MopsError::invalid(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Gradients entering the dynamic weight update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightGrads {
    /// Shared-part parameter gradients only.
    #[default]
    Shared,
    /// Shared-part plus the agent's own parameter gradients.
    Full,
}

/// How agents are scheduled within a round. Both produce identical results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Harness {
    #[default]
    Single,
    Threaded,
}

fn d_algorithm() -> Algorithm {
    Algorithm::Static
}
fn d_scheme() -> Scheme {
    Scheme::ShareTop
}
fn d_rounds() -> usize {
    1000
}
fn d_beta() -> f64 {
    5e-4
}
fn d_eta() -> f64 {
    0.1
}
fn d_metrics_every() -> usize {
    10
}
fn d_n_pop_factor() -> f64 {
    50.0
}
fn d_task() -> TaskConfig {
    TaskConfig::toy(0.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "d_algorithm")]
    pub algorithm: Algorithm,
    #[serde(default = "d_scheme")]
    pub scheme: Scheme,
    /// Number of coordination rounds.
    #[serde(rename = "T", default = "d_rounds")]
    pub rounds: usize,
    #[serde(default = "d_beta")]
    pub beta: f64,
    #[serde(default = "d_eta")]
    pub eta: f64,
    /// Initial weights; uniform when absent.
    #[serde(default)]
    pub gamma_init: Option<WeightSimplex>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_task")]
    pub task: TaskConfig,
    /// Metric cadence in rounds; 0 disables metrics entirely.
    #[serde(default = "d_metrics_every")]
    pub metrics_every: usize,
    /// Population proxy size as a multiple of the training-set size.
    #[serde(default = "d_n_pop_factor")]
    pub n_pop_factor: f64,
    #[serde(default)]
    pub weight_grads: WeightGrads,
    #[serde(default)]
    pub harness: Harness,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            algorithm: d_algorithm(),
            scheme: d_scheme(),
            rounds: d_rounds(),
            beta: d_beta(),
            eta: d_eta(),
            gamma_init: None,
            seed: 0,
            task: d_task(),
            metrics_every: d_metrics_every(),
            n_pop_factor: d_n_pop_factor(),
            weight_grads: WeightGrads::Shared,
            harness: Harness::Single,
        }
    }
}

impl TrainConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrainConfig =
            serde_json::from_str(text).map_err(|e| MopsError::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MopsError::invalid(format!("reading {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(MopsError::invalid("T must be at least 1"));
        }
        if u32::try_from(self.rounds).is_err() {
            return Err(MopsError::invalid("T exceeds the u32 round counter"));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(MopsError::invalid(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(MopsError::invalid(format!("eta must be >= 0, got {}", self.eta)));
        }
        if !(self.n_pop_factor.is_finite() && self.n_pop_factor > 0.0) {
            return Err(MopsError::invalid("n_pop_factor must be > 0"));
        }
        if !(self.task.sigma.is_finite() && self.task.sigma >= 0.0) {
            return Err(MopsError::invalid("task.sigma must be >= 0"));
        }
        let agents = self.task.resolve(self.seed)?.agents();
        if let Some(g) = &self.gamma_init {
            if g.len() != agents {
                return Err(MopsError::invalid(format!(
                    "gamma_init has {} entries for {agents} agents",
                    g.len()
                )));
            }
        }
        Ok(())
    }

    pub fn initial_weights(&self, agents: usize) -> WeightSimplex {
        self.gamma_init
            .clone()
            .unwrap_or_else(|| WeightSimplex::uniform(agents))
    }

    /// Samples uploaded per agent per round.
    pub fn samples_per_round(&self) -> usize {
        match self.algorithm {
            Algorithm::Static => 1,
            Algorithm::Dynamic => 3,
        }
    }
}
