//! Summary JSON written next to the metrics CSVs.

use std::path::Path;

use anyhow::{bail, Context, Result};
use mops_core::metrics::{read_csv, ConstantsFit, MetricsRecord};
use mops_core::training::Trajectory;
use mops_core::TrainConfig;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTriple {
    pub o_err: f64,
    pub g_err: f64,
    pub c_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// Sweep value this run belongs to; absent for single runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    pub csv: String,
    pub config: TrainConfig,
    pub agents: usize,
    pub measured_rounds: usize,
    pub final_errors: Option<ErrorTriple>,
    pub average_errors: Option<ErrorTriple>,
    pub final_gamma: Option<Vec<f64>>,
    pub flops_agent: u64,
    pub flops_ctrl: u64,
    pub bytes: u64,
    pub bytes_per_round: u64,
}

impl RunSummary {
    pub fn new(value: Option<String>, csv: String, config: TrainConfig, traj: &Trajectory) -> Self {
        let records = &traj.records;
        let last = records.last();
        let avg = |f: fn(&MetricsRecord) -> f64| records.iter().map(f).sum::<f64>() / records.len() as f64;
        RunSummary {
            value,
            csv,
            config,
            agents: traj.agents,
            measured_rounds: records.len(),
            final_errors: last.map(|r| ErrorTriple {
                o_err: r.o_err,
                g_err: r.g_err,
                c_err: r.c_err,
            }),
            average_errors: (!records.is_empty()).then(|| ErrorTriple {
                o_err: avg(|r| r.o_err),
                g_err: avg(|r| r.g_err),
                c_err: avg(|r| r.c_err),
            }),
            final_gamma: last.map(|r| r.gamma.clone()),
            flops_agent: last.map_or(0, |r| r.flops_agent),
            flops_ctrl: last.map_or(0, |r| r.flops_ctrl),
            bytes: last.map_or(0, |r| r.bytes),
            bytes_per_round: traj.bytes_per_round,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slopes {
    pub o_err: Option<f64>,
    pub g_err: Option<f64>,
    pub c_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlopsRow {
    pub scheme: String,
    pub agent_train_per_round: u64,
    pub agent_inference: u64,
    pub controller_train_per_agent: u64,
    pub inference_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<String>,
    pub runs: Vec<RunSummary>,
    /// Log-log slopes of time-averaged errors against the swept axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slopes: Option<Slopes>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flops_table: Option<Vec<FlopsRow>>,
}

impl Summary {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(SUMMARY_FILE);
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(SUMMARY_FILE);
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let s: Summary = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if s.schema_version != SCHEMA_VERSION {
            bail!("{}: unsupported schema_version {}", path.display(), s.schema_version);
        }
        Ok(s)
    }
}

/// Re-reads a run's CSV and checks it against its summary entry.
pub fn check_run_artifact(dir: &Path, run: &RunSummary) -> Result<Vec<MetricsRecord>> {
    let path = dir.join(&run.csv);
    let file = std::fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let records = read_csv(std::io::BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))?;
    if records.len() != run.measured_rounds {
        bail!(
            "{}: {} rows, summary lists {} measured rounds",
            path.display(),
            records.len(),
            run.measured_rounds
        );
    }
    if let (Some(last), Some(fin)) = (records.last(), &run.final_errors) {
        if last.o_err != fin.o_err || last.g_err != fin.g_err || last.c_err != fin.c_err || last.bytes != run.bytes {
            bail!("{}: final row disagrees with the summary", path.display());
        }
    }
    Ok(records)
}
