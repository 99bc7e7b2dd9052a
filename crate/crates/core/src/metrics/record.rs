//! Per-round metric records and their CSV form.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{MopsError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub round: usize,
    pub o_err: f64,
    pub o_err_agents: Vec<f64>,
    pub g_err: f64,
    pub g_err_agents: Vec<f64>,
    pub c_err: f64,
    pub min_norm: f64,
    pub gamma: Vec<f64>,
    /// Cumulative flops summed over all agents.
    pub flops_agent: u64,
    pub flops_ctrl: u64,
    /// Cumulative bytes sent over the E- and G-interfaces.
    pub bytes: u64,
}

impl MetricsRecord {
    pub fn validate(&self) -> Result<()> {
        let reals = [self.o_err, self.g_err, self.c_err, self.min_norm]
            .into_iter()
            .chain(self.o_err_agents.iter().copied())
            .chain(self.g_err_agents.iter().copied());
        for x in reals {
            if !x.is_finite() || x < 0.0 {
                return Err(MopsError::numeric(format!(
                    "round {}: metric value {x} is not a finite nonnegative number",
                    self.round
                )));
            }
        }
        Ok(())
    }
}

pub fn csv_header(agents: usize) -> String {
    let mut cols = vec!["round", "o_err", "g_err", "c_err", "min_norm"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    cols.extend((0..agents).map(|i| format!("gamma_{i}")));
    cols.extend(["flops_agent", "flops_ctrl", "bytes"].map(String::from));
    cols.join(",")
}

/// Writes the header and one row per record. Reals use the shortest
/// representation that round-trips, so output is exact and reproducible.
pub fn write_csv<W: Write>(records: &[MetricsRecord], agents: usize, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", csv_header(agents))?;
    for r in records {
        write!(out, "{},{},{},{},{}", r.round, r.o_err, r.g_err, r.c_err, r.min_norm)?;
        for g in &r.gamma {
            write!(out, ",{g}")?;
        }
        writeln!(out, ",{},{},{}", r.flops_agent, r.flops_ctrl, r.bytes)?;
    }
    Ok(())
}

pub fn to_csv_string(records: &[MetricsRecord], agents: usize) -> String {
    let mut buf = Vec::new();
    write_csv(records, agents, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("csv output is ascii")
}

/// Parses a metrics CSV. Per-agent error columns are not part of the CSV and
/// come back empty.
pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<MetricsRecord>> {
    let mut lines = input.lines();
    let header = match lines.next() {
        Some(h) => h.map_err(|e| MopsError::invalid(format!("reading csv: {e}")))?,
        None => return Err(MopsError::invalid("empty metrics csv")),
    };
    let cols: Vec<&str> = header.trim_end().split(',').collect();
    if cols.len() < 9 {
        return Err(MopsError::invalid("metrics csv header too short"));
    }
    let agents = cols.len() - 8;
    if header.trim_end() != csv_header(agents) {
        return Err(MopsError::invalid(format!("unexpected metrics csv header {header:?}")));
    }
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| MopsError::invalid(format!("reading csv: {e}")))?;
        let bad = |what: &str| MopsError::invalid(format!("metrics csv line {}: {what}", n + 2));
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != cols.len() {
            return Err(bad("wrong number of fields"));
        }
        let real = |s: &str| -> Result<f64> {
            let x: f64 = s.parse().map_err(|_| bad("bad number"))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(bad("non-finite number"))
            }
        };
        let int = |s: &str| -> Result<u64> { s.parse().map_err(|_| bad("bad integer")) };
        let rec = MetricsRecord {
            round: int(f[0])? as usize,
            o_err: real(f[1])?,
            g_err: real(f[2])?,
            c_err: real(f[3])?,
            min_norm: real(f[4])?,
            gamma: f[5..5 + agents].iter().map(|s| real(s)).collect::<Result<_>>()?,
            flops_agent: int(f[5 + agents])?,
            flops_ctrl: int(f[6 + agents])?,
            bytes: int(f[7 + agents])?,
            o_err_agents: Vec::new(),
            g_err_agents: Vec::new(),
        };
        rec.validate().map_err(|e| bad(&e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}
