use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mops_core::metrics::{
    bound_curve, fit_constants, fit_rate_slope, BoundKind, BoundPoint, ConstantsFit, RunObservation,
};
use mops_core::model::{flops, Part, Phase};
use mops_core::tasks::TaskModality;
use mops_core::training::{run_training, timeseries_spec, Algorithm};
use mops_core::verify::{self, VerifyOptions};
use mops_core::{Scheme, TrainConfig};
use rayon::prelude::*;

use crate::report::{check_run_artifact, FlopsRow, RunSummary, Slopes, Summary, SCHEMA_VERSION};
use crate::InputError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    T,
    Beta,
    Eta,
    D,
    Scheme,
    Algorithm,
}

impl Axis {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "T" | "t" | "rounds" => Axis::T,
            "beta" => Axis::Beta,
            "eta" => Axis::Eta,
            "D" | "d" | "train_size" => Axis::D,
            "scheme" => Axis::Scheme,
            "algorithm" => Axis::Algorithm,
            other => return Err(InputError(format!("unknown axis {other:?}; use T, beta, eta, D, scheme or algorithm")).into()),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::T => "T",
            Axis::Beta => "beta",
            Axis::Eta => "eta",
            Axis::D => "D",
            Axis::Scheme => "scheme",
            Axis::Algorithm => "algorithm",
        }
    }

    fn numeric(self) -> bool {
        matches!(self, Axis::T | Axis::Beta | Axis::Eta | Axis::D)
    }
}

pub struct Overrides {
    pub seed: Option<u64>,
    pub metrics_every: Option<usize>,
}

pub fn load_config(path: &Path, o: &Overrides) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::from_file(path)?;
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(k) = o.metrics_every {
        cfg.metrics_every = k;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn execute(cfg: TrainConfig, value: Option<String>, csv: String, out: &Path) -> Result<RunSummary> {
    let traj = run_training(cfg.clone())?;
    let path = out.join(&csv);
    std::fs::write(&path, traj.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    Ok(RunSummary::new(value, csv, cfg, &traj))
}

pub fn cmd_run(cfg: TrainConfig, out: &Path) -> Result<Summary> {
    create_dir(out)?;
    let run = execute(cfg, None, "metrics.csv".into(), out)?;
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        command: "run".into(),
        axis: None,
        runs: vec![run],
        slopes: None,
        constants: None,
        flops_table: None,
    };
    summary.write(out)?;
    Ok(summary)
}

pub fn apply_axis(base: &TrainConfig, axis: Axis, value: &str, rate_schedule: Option<f64>) -> Result<TrainConfig> {
    let bad = |e: String| InputError(format!("axis {} value {value:?}: {e}", axis.name()));
    let mut cfg = base.clone();
    match axis {
        Axis::T => {
            cfg.rounds = value.parse().map_err(|e| bad(format!("{e}")))?;
            if let Some(c) = rate_schedule {
                cfg.beta = c / (cfg.rounds as f64).sqrt();
            }
        }
        Axis::Beta => cfg.beta = value.parse().map_err(|e| bad(format!("{e}")))?,
        Axis::Eta => cfg.eta = value.parse().map_err(|e| bad(format!("{e}")))?,
        Axis::D => {
            if cfg.task.modality.contains(&TaskModality::Toy) {
                return Err(bad("the toy task has no training-set size".into()).into());
            }
            cfg.task.train_size = value.parse().map_err(|e| bad(format!("{e}")))?;
        }
        Axis::Scheme => cfg.scheme = value.parse().map_err(|e| bad(format!("{e}")))?,
        Axis::Algorithm => cfg.algorithm = value.parse().map_err(|e| bad(format!("{e}")))?,
    }
    if rate_schedule.is_some() && axis != Axis::T {
        return Err(InputError("--rate-schedule only applies to --axis T".into()).into());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn file_safe(value: &str) -> String {
    value
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect()
}

fn axis_value(axis: Axis, cfg: &TrainConfig) -> Option<f64> {
    match axis {
        Axis::T => Some(cfg.rounds as f64),
        Axis::Beta => Some(cfg.beta),
        Axis::Eta => Some(cfg.eta),
        Axis::D => Some(cfg.task.train_size as f64),
        Axis::Scheme | Axis::Algorithm => None,
    }
}

fn training_size(cfg: &TrainConfig) -> f64 {
    if cfg.task.modality.contains(&TaskModality::Toy) {
        1.0
    } else {
        cfg.task.train_size as f64
    }
}

pub fn observation(run: &RunSummary) -> Option<RunObservation> {
    let avg = run.average_errors.as_ref()?;
    let c = &run.config;
    let dynamic = c.algorithm == Algorithm::Dynamic;
    let toy = c.task.modality.contains(&TaskModality::Toy);
    Some(RunObservation {
        dynamic,
        t: c.rounds as f64,
        beta: c.beta,
        eta: if dynamic { c.eta } else { 0.0 },
        d: training_size(c),
        o_err: Some(avg.o_err),
        g_err: (!toy).then_some(avg.g_err),
        c_err: dynamic.then_some(avg.c_err),
    })
}

fn slopes(axis: Axis, runs: &[RunSummary]) -> Option<Slopes> {
    if !axis.numeric() || runs.len() < 4 {
        return None;
    }
    let series = |f: fn(&crate::report::ErrorTriple) -> f64| -> Option<f64> {
        let pts: Option<Vec<(f64, f64)>> = runs
            .iter()
            .map(|r| Some((axis_value(axis, &r.config)?, f(r.average_errors.as_ref()?))))
            .collect();
        fit_rate_slope(&pts?).ok()
    };
    Some(Slopes {
        o_err: series(|e| e.o_err),
        g_err: series(|e| e.g_err),
        c_err: series(|e| e.c_err),
    })
}

pub fn flops_row(scheme: Scheme) -> Result<FlopsRow> {
    let spec = timeseries_spec(scheme)?;
    let train = flops(&spec, Part::Agent, Phase::Forward) + flops(&spec, Part::Agent, Phase::Backward);
    let ctrl = flops(&spec, Part::Shared, Phase::Forward) + flops(&spec, Part::Shared, Phase::Backward);
    let inference = flops(&spec, Part::Full, Phase::Inference);
    Ok(FlopsRow {
        scheme: scheme.name().into(),
        agent_train_per_round: train,
        agent_inference: inference,
        controller_train_per_agent: ctrl,
        inference_share: inference as f64 / (train + ctrl) as f64,
    })
}

pub fn cmd_sweep(
    base: &TrainConfig,
    axis: Axis,
    values: &[String],
    rate_schedule: Option<f64>,
    out: &Path,
) -> Result<Summary> {
    if values.is_empty() {
        return Err(InputError("--values needs at least one value".into()).into());
    }
    let configs: Vec<TrainConfig> = values
        .iter()
        .map(|v| apply_axis(base, axis, v, rate_schedule))
        .collect::<Result<_>>()?;
    create_dir(out)?;
    let runs: Vec<RunSummary> = configs
        .into_par_iter()
        .zip(values.par_iter())
        .map(|(cfg, v)| {
            let csv = format!("run_{}_{}.csv", axis.name(), file_safe(v));
            execute(cfg, Some(v.clone()), csv, out).with_context(|| format!("{} = {v}", axis.name()))
        })
        .collect::<Result<_>>()?;
    let obs: Vec<RunObservation> = runs.iter().filter_map(observation).collect();
    let flops_table = if axis == Axis::Scheme {
        Some(runs.iter().map(|r| flops_row(r.config.scheme)).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        command: "sweep".into(),
        axis: Some(axis.name().into()),
        slopes: slopes(axis, &runs),
        constants: fit_constants(&obs).ok(),
        flops_table,
        runs,
    };
    summary.write(out)?;
    Ok(summary)
}

fn read_checked(out: &Path) -> Result<Summary> {
    let summary = Summary::read(out).map_err(|e| InputError(format!("{e:#}")))?;
    for run in &summary.runs {
        check_run_artifact(out, run).map_err(|e| InputError(format!("{e:#}")))?;
    }
    Ok(summary)
}

/// Returns the printed report and whether every check passed.
pub fn cmd_verify(out: &Path, checks: &[u8], threads: usize) -> Result<(String, bool)> {
    let summary = read_checked(out)?;
    let mut text = String::new();
    writeln!(
        text,
        "[PASS] artifacts: {} {} run(s) in {} match their CSVs",
        summary.runs.len(),
        summary.command,
        out.display()
    )?;
    let opts = VerifyOptions { threads };
    let selected: Vec<&verify::Criterion> = if checks.is_empty() {
        verify::CRITERIA.iter().collect()
    } else {
        checks
            .iter()
            .map(|&id| verify::criterion(id).ok_or_else(|| InputError(format!("no acceptance check {id}"))))
            .collect::<std::result::Result<_, _>>()?
    };
    let mut all = true;
    let mut outcomes = Vec::new();
    for c in selected {
        let o = verify::run_criterion(c, &opts);
        all &= o.passed;
        writeln!(text, "{}", o.line())?;
        outcomes.push(o);
    }
    let path = out.join("verify.json");
    std::fs::write(&path, serde_json::to_string_pretty(&outcomes)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok((text, all))
}

/// Observed averages next to the fitted bound curves, one row per run.
pub fn cmd_rates(out: &Path) -> Result<String> {
    let summary = read_checked(out)?;
    let obs: Vec<(Option<&str>, RunObservation)> = summary
        .runs
        .iter()
        .filter_map(|r| Some((r.value.as_deref(), observation(r)?)))
        .collect();
    if obs.is_empty() {
        return Err(InputError(format!("{}: no run has measured rounds", out.display())).into());
    }
    let fit: Option<ConstantsFit> = fit_constants(&obs.iter().map(|o| o.1).collect::<Vec<_>>()).ok();
    let mut csv = String::from("value,T,beta,eta,D,o_err,o_bound,g_err,g_bound,c_err,c_bound\n");
    let fmt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    for (value, o) in &obs {
        let p = BoundPoint { t: o.t, beta: o.beta, eta: o.eta, d: o.d };
        let bound = |kind: BoundKind| fit.as_ref().and_then(|f| bound_curve(kind, &f.constants, &p).ok());
        let o_kind = if o.dynamic { BoundKind::ODynamic } else { BoundKind::OStatic };
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            value.unwrap_or(""),
            o.t,
            o.beta,
            o.eta,
            o.d,
            fmt(o.o_err),
            fmt(bound(o_kind)),
            fmt(o.g_err),
            fmt(o.g_err.and(bound(BoundKind::G))),
            fmt(o.c_err),
            fmt(o.c_err.and(bound(BoundKind::CDynamic))),
        )?;
    }
    let path: PathBuf = out.join("rates.csv");
    std::fs::write(&path, &csv).with_context(|| format!("writing {}", path.display()))?;

    let mut text = String::new();
    match (&summary.axis, &summary.slopes) {
        (Some(axis), Some(s)) => {
            let f = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.4}"));
            writeln!(
                text,
                "log-log slope vs {axis}: O {}, G {}, C {}",
                f(s.o_err),
                f(s.g_err),
                f(s.c_err)
            )?;
        }
        _ => writeln!(text, "no rate slopes (needs a numeric sweep with at least 4 values)")?,
    }
    match &fit {
        Some(f) => writeln!(
            text,
            "fitted constants: c_I {:.4}, mu_g {:.4}, mu_l {:.4}{}, G {:.4}, V {:.4}; O residual {:.4}",
            f.constants.c_i,
            f.constants.mu_g,
            f.constants.mu_l,
            if f.mu_l_identified { "" } else { " (unidentified)" },
            f.constants.g,
            f.constants.v,
            f.residual_o
        )?,
        None => writeln!(text, "bound constants not identifiable from these runs")?,
    }
    writeln!(text, "wrote {}", path.display())?;
    Ok(text)
}

pub fn summary_line(run: &RunSummary) -> String {
    let label = run.value.as_deref().map(|v| format!("{v}: ")).unwrap_or_default();
    match (&run.final_errors, &run.average_errors) {
        (Some(f), Some(a)) => format!(
            "{label}final O {:.4} G {:.4} C {:.4}; average O {:.4} G {:.4} C {:.4}; {} bytes -> {}",
            f.o_err, f.g_err, f.c_err, a.o_err, a.g_err, a.c_err, run.bytes, run.csv
        ),
        _ => format!("{label}no metrics recorded -> {}", run.csv),
    }
}
