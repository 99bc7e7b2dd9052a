//! Synthetic problems: the quadratic toy landscape and time-series prediction.

pub mod timeseries;
pub mod toy;

use serde::{Deserialize, Serialize};

use crate::error::{MopsError, Result};

pub use timeseries::{
    gen_timeseries, population_sample, sample_from_stream, Dataset, Modality, TimeSeriesTask,
    WINDOW_IN, WINDOW_OUT,
};
pub use toy::ToyObjectiveSet;

/// Modality keyword accepted in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskModality {
    /// The three-agent quadratic landscape.
    Toy,
    Demand,
    Csi,
    Traffic,
    /// One agent per time-series modality: demand, csi, traffic.
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(TaskModality),
    Many(Vec<TaskModality>),
}

fn de_modalities<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<TaskModality>, D::Error> {
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(m) => vec![m],
        OneOrMany::Many(v) => v,
    })
}

fn default_train_size() -> usize {
    500
}

fn default_sigma() -> f64 {
    0.1
}

/// Task section of a training config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    #[serde(deserialize_with = "de_modalities")]
    pub modality: Vec<TaskModality>,
    /// Training windows per agent (time-series tasks).
    #[serde(default = "default_train_size")]
    pub train_size: usize,
    /// Gradient noise level (toy task).
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Starting point of the toy parameters; defaults to the origin.
    #[serde(default)]
    pub toy_init: Option<[f64; 2]>,
}

impl TaskConfig {
    pub fn toy(sigma: f64) -> Self {
        TaskConfig {
            modality: vec![TaskModality::Toy],
            train_size: default_train_size(),
            sigma,
            toy_init: None,
        }
    }

    pub fn timeseries(modalities: &[Modality], train_size: usize) -> Self {
        TaskConfig {
            modality: modalities
                .iter()
                .map(|m| match m {
                    Modality::Demand => TaskModality::Demand,
                    Modality::Csi => TaskModality::Csi,
                    Modality::Traffic => TaskModality::Traffic,
                })
                .collect(),
            train_size,
            sigma: default_sigma(),
            toy_init: None,
        }
    }

    /// Expands the config into a concrete task for `seed`.
    pub fn resolve(&self, seed: u64) -> Result<Task> {
        if self.modality.is_empty() {
            return Err(MopsError::invalid("task needs at least one modality"));
        }
        if self.modality.contains(&TaskModality::Toy) {
            if self.modality.len() != 1 {
                return Err(MopsError::invalid("the toy task cannot be mixed with other modalities"));
            }
            return Ok(Task::Toy {
                set: ToyObjectiveSet::symmetric(self.sigma),
                init: self.toy_init.unwrap_or([0.0, 0.0]),
            });
        }
        let mut tasks = Vec::new();
        for m in &self.modality {
            let ms: &[Modality] = match m {
                TaskModality::Demand => &[Modality::Demand],
                TaskModality::Csi => &[Modality::Csi],
                TaskModality::Traffic => &[Modality::Traffic],
                TaskModality::Mixed => &Modality::ALL,
                TaskModality::Toy => unreachable!(),
            };
            tasks.extend(ms.iter().map(|&modality| TimeSeriesTask {
                modality,
                train_size: self.train_size,
                seed,
                noiseless: false,
            }));
        }
        Ok(Task::TimeSeries(tasks))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    Toy { set: ToyObjectiveSet, init: [f64; 2] },
    /// One time-series task per agent.
    TimeSeries(Vec<TimeSeriesTask>),
}

impl Task {
    pub fn agents(&self) -> usize {
        match self {
            Task::Toy { set, .. } => set.agents(),
            Task::TimeSeries(ts) => ts.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_single_and_list() {
        let c: TaskConfig = serde_json::from_str(r#"{"modality": "csi", "train_size": 200}"#).unwrap();
        assert_eq!(c.modality, vec![TaskModality::Csi]);
        let c: TaskConfig = serde_json::from_str(r#"{"modality": ["demand", "traffic"]}"#).unwrap();
        assert_eq!(c.train_size, 500);
        assert_eq!(c.resolve(1).unwrap().agents(), 2);
        let c: TaskConfig = serde_json::from_str(r#"{"modality": "mixed"}"#).unwrap();
        assert_eq!(c.resolve(1).unwrap().agents(), 3);
    }

    #[test]
    fn toy_cannot_mix() {
        let c: TaskConfig = serde_json::from_str(r#"{"modality": ["toy", "csi"]}"#).unwrap();
        assert!(c.resolve(0).is_err());
        assert!(serde_json::from_str::<TaskConfig>(r#"{"modality": "video"}"#).is_err());
    }
}
