//! Synthetic prediction tasks: 15-step observation window, 5-step target window.
//!
//! - `demand`: piecewise-constant level (switches with probability 0.05 per
//!   step, new level uniform on [0, 1]) plus N(0, 0.02^2) noise.
//! - `csi`: three sinusoids with amplitudes (1, 0.5, 0.25), frequencies in
//!   [0.01, 0.2] cycles/step and random phases, plus N(0, 0.1^2) noise.
//! - `traffic`: AR(2) component (coefficients 1.5, -0.6, innovation std 0.05)
//!   on top of a unit-amplitude sinusoid with a 100-step period.
//!
//! Generator parameters (frequencies, phases) depend only on the task seed.
//! Realizations (noise, level switches, innovations) come from a separate
//! stream per dataset; the training split uses stream 0 starting at t = 0,
//! every other stream starts far past the training horizon. Windows are cut
//! with stride 1 and standardized with the training series' mean and std.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{MopsError, Result};
use crate::math::RngState;

pub const WINDOW_IN: usize = 15;
pub const WINDOW_OUT: usize = 5;
pub const WINDOW_SPAN: usize = WINDOW_IN + WINDOW_OUT;

pub const TRAIN_STREAM: u64 = 0;
pub const POPULATION_STREAM: u64 = 1;
const PARAMS_STREAM: u64 = 0xC0FFEE;
const STREAM_TIME_OFFSET: u64 = 1 << 24;
const AR_BURN_IN: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Demand,
    Csi,
    Traffic,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Demand, Modality::Csi, Modality::Traffic];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Demand => "demand",
            Modality::Csi => "csi",
            Modality::Traffic => "traffic",
        }
    }

    fn salt(self) -> u64 {
        match self {
            Modality::Demand => 0x11,
            Modality::Csi => 0x22,
            Modality::Traffic => 0x33,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesTask {
    pub modality: Modality,
    /// Number of windows in the training split.
    pub train_size: usize,
    pub seed: u64,
    /// Drop all observation noise (CSI sinusoids stay exactly linear-predictable).
    #[serde(default)]
    pub noiseless: bool,
}

/// Windowed, standardized samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    /// Standardization applied: `(raw - mean) / std`.
    pub mean: f64,
    pub std: f64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// One window per row: `x0..x14,y0..y4`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = (0..WINDOW_IN)
            .map(|i| format!("x{i}"))
            .chain((0..WINDOW_OUT).map(|i| format!("y{i}")))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (x, y) in self.x.iter().zip(&self.y) {
            let row: Vec<String> = x.iter().chain(y).map(|v| v.to_string()).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

struct GeneratorParams {
    freqs: [f64; 3],
    phases: [f64; 3],
    diurnal_phase: f64,
}

impl GeneratorParams {
    fn of(task: &TimeSeriesTask) -> Self {
        let mut rng = RngState::new(task.seed ^ task.modality.salt(), PARAMS_STREAM);
        let mut freqs = [0.0; 3];
        let mut phases = [0.0; 3];
        for k in 0..3 {
            freqs[k] = rng.uniform_range(0.01, 0.2);
            phases[k] = rng.uniform_range(0.0, std::f64::consts::TAU);
        }
        GeneratorParams {
            freqs,
            phases,
            diurnal_phase: rng.uniform_range(0.0, std::f64::consts::TAU),
        }
    }
}

/// Raw (unstandardized) series of `len` steps from realization stream `stream`.
pub fn raw_series(task: &TimeSeriesTask, stream: u64, len: usize) -> Vec<f64> {
    let params = GeneratorParams::of(task);
    let mut rng = RngState::new(task.seed ^ task.modality.salt(), stream.wrapping_add(1));
    let t0 = stream * STREAM_TIME_OFFSET;
    let noise = |rng: &mut RngState, sd: f64| if task.noiseless { 0.0 } else { sd * rng.gaussian() };
    match task.modality {
        Modality::Demand => {
            let mut level = rng.uniform();
            (0..len)
                .map(|_| {
                    if rng.bernoulli(0.05) {
                        level = rng.uniform();
                    }
                    level + noise(&mut rng, 0.02)
                })
                .collect()
        }
        Modality::Csi => {
            let amps = [1.0, 0.5, 0.25];
            (0..len)
                .map(|k| {
                    let t = (t0 + k as u64) as f64;
                    let s: f64 = (0..3)
                        .map(|j| amps[j] * (std::f64::consts::TAU * params.freqs[j] * t + params.phases[j]).sin())
                        .sum();
                    s + noise(&mut rng, 0.1)
                })
                .collect()
        }
        Modality::Traffic => {
            let (mut a1, mut a2) = (0.0, 0.0);
            for _ in 0..AR_BURN_IN {
                let next = 1.5 * a1 - 0.6 * a2 + noise(&mut rng, 0.05);
                a2 = a1;
                a1 = next;
            }
            (0..len)
                .map(|k| {
                    let next = 1.5 * a1 - 0.6 * a2 + noise(&mut rng, 0.05);
                    a2 = a1;
                    a1 = next;
                    let t = (t0 + k as u64) as f64;
                    (std::f64::consts::TAU * t / 100.0 + params.diurnal_phase).sin() + next
                })
                .collect()
        }
    }
}

fn mean_std(series: &[f64]) -> (f64, f64) {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn windows(series: &[f64], mean: f64, std: f64) -> Dataset {
    let z: Vec<f64> = series.iter().map(|v| (v - mean) / std).collect();
    let n = z.len() + 1 - WINDOW_SPAN;
    let x = (0..n).map(|k| z[k..k + WINDOW_IN].to_vec()).collect();
    let y = (0..n).map(|k| z[k + WINDOW_IN..k + WINDOW_SPAN].to_vec()).collect();
    Dataset { x, y, mean, std }
}

/// Training statistics `(mean, std)` of the task's training series.
pub fn training_stats(task: &TimeSeriesTask) -> Result<(f64, f64)> {
    validate(task)?;
    let series = raw_series(task, TRAIN_STREAM, task.train_size + WINDOW_SPAN - 1);
    let (mean, std) = mean_std(&series);
    if std.is_nan() || std <= 0.0 {
        return Err(MopsError::numeric("training series has zero variance"));
    }
    Ok((mean, std))
}

fn validate(task: &TimeSeriesTask) -> Result<()> {
    if task.train_size < WINDOW_SPAN {
        return Err(MopsError::invalid(format!(
            "train size {} is smaller than the {WINDOW_SPAN}-step window span",
            task.train_size
        )));
    }
    Ok(())
}

/// Training dataset `D^i` of `train_size` windows.
pub fn gen_timeseries(task: &TimeSeriesTask) -> Result<Dataset> {
    let (mean, std) = training_stats(task)?;
    let series = raw_series(task, TRAIN_STREAM, task.train_size + WINDOW_SPAN - 1);
    Ok(windows(&series, mean, std))
}

/// `n` fresh windows from the population stream, standardized with training statistics.
pub fn population_sample(task: &TimeSeriesTask, n: usize) -> Result<Dataset> {
    sample_from_stream(task, n, POPULATION_STREAM)
}

pub fn sample_from_stream(task: &TimeSeriesTask, n: usize, stream: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(MopsError::invalid("population sample size must be at least 1"));
    }
    let (mean, std) = training_stats(task)?;
    let series = raw_series(task, stream, n + WINDOW_SPAN - 1);
    Ok(windows(&series, mean, std))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(modality: Modality, train_size: usize) -> TimeSeriesTask {
        TimeSeriesTask {
            modality,
            train_size,
            seed: 5,
            noiseless: false,
        }
    }

    #[test]
    fn deterministic() {
        for m in Modality::ALL {
            assert_eq!(gen_timeseries(&task(m, 100)).unwrap(), gen_timeseries(&task(m, 100)).unwrap());
        }
    }

    #[test]
    fn shapes() {
        let d = gen_timeseries(&task(Modality::Traffic, 64)).unwrap();
        assert_eq!(d.len(), 64);
        assert!(d.x.iter().all(|x| x.len() == WINDOW_IN));
        assert!(d.y.iter().all(|y| y.len() == WINDOW_OUT));
        assert!(d.x.iter().flatten().all(|v| v.is_finite()));
    }

    #[test]
    fn standardized_training_series() {
        for m in Modality::ALL {
            let t = task(m, 300);
            let (mean, std) = training_stats(&t).unwrap();
            let series = raw_series(&t, TRAIN_STREAM, 300 + WINDOW_SPAN - 1);
            let z: Vec<f64> = series.iter().map(|v| (v - mean) / std).collect();
            let (zm, zs) = mean_std(&z);
            assert!(zm.abs() < 1e-9 && (zs * zs - 1.0).abs() < 1e-9, "{m:?}: {zm} {zs}");
        }
    }

    #[test]
    fn too_small() {
        assert!(matches!(
            gen_timeseries(&task(Modality::Csi, 19)),
            Err(MopsError::InvalidArgument(_))
        ));
        assert!(gen_timeseries(&task(Modality::Csi, 20)).is_ok());
    }

    #[test]
    fn population_differs_from_training() {
        let t = task(Modality::Demand, 100);
        let train = gen_timeseries(&t).unwrap();
        let pop = population_sample(&t, 100).unwrap();
        assert_ne!(train.x, pop.x);
        assert_eq!((pop.mean, pop.std), (train.mean, train.std));
    }

    #[test]
    fn same_stream_reproduces_training() {
        let t = task(Modality::Traffic, 80);
        let train = gen_timeseries(&t).unwrap();
        assert_eq!(sample_from_stream(&t, 80, TRAIN_STREAM).unwrap(), train);
    }

    #[test]
    fn csv_export() {
        let d = gen_timeseries(&task(Modality::Csi, 20)).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 21);
        assert!(lines[0].starts_with("x0,x1") && lines[0].ends_with("y4"));
        assert_eq!(lines[1].split(',').count(), 20);
    }
}
