use std::io::Write;

use serde::{Deserialize, Serialize};

use super::spec::Target;
use crate::error::{Result, SieveError};
use crate::occupancy::RegimeTally;

pub const CALIBRATION_NOTE: &str = "finite-n thresholds are calibration values from pilot runs, \
not theoretical constants; the limit theorems give no convergence rates";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// No threshold applies; the value is reported only.
    Report,
}

impl Verdict {
    /// `Pass` iff `value < threshold`; `Report` without a threshold.
    pub fn below(value: f64, threshold: Option<f64>) -> Verdict {
        match threshold {
            Some(th) if value < th => Verdict::Pass,
            Some(_) => Verdict::Fail,
            None => Verdict::Report,
        }
    }

    pub fn holds(ok: bool) -> Verdict {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// Summary of one statistic at one `(n, t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub n: u64,
    pub t: Option<f64>,
    pub statistic: String,
    pub replicates: usize,
    pub mean: f64,
    pub variance: f64,
    pub median: f64,
    pub ks: Option<f64>,
    pub threshold: Option<f64>,
    pub verdict: Verdict,
}

/// A scalar check outside the per-`(n, t)` table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: Option<f64>,
    pub verdict: Verdict,
}

/// One replicate value as written to CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub series: String,
    pub n: u64,
    pub t: Option<f64>,
    pub replicate: usize,
    pub raw: f64,
    pub normalized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub target: Target,
    pub seed: u64,
    pub replicates: usize,
    pub n_values: Vec<u64>,
    pub rows: Vec<StatRow>,
    pub checks: Vec<Check>,
    pub note: String,
    pub runtime_seconds: f64,
    pub regimes: RegimeTally,
    #[serde(skip)]
    pub samples: Vec<SampleRecord>,
}

impl ExperimentReport {
    pub fn new(target: Target, seed: u64, replicates: usize, n_values: &[u64]) -> Self {
        ExperimentReport {
            target,
            seed,
            replicates,
            n_values: n_values.to_vec(),
            rows: Vec::new(),
            checks: Vec::new(),
            note: CALIBRATION_NOTE.to_string(),
            runtime_seconds: 0.0,
            regimes: RegimeTally::default(),
            samples: Vec::new(),
        }
    }

    pub fn check(&mut self, name: impl Into<String>, value: f64, threshold: Option<f64>, verdict: Verdict) {
        self.checks.push(Check {
            name: name.into(),
            value,
            threshold,
            verdict,
        });
    }

    /// Rows and checks with a `Fail` verdict, as readable lines.
    pub fn failures(&self) -> Vec<String> {
        let rows = self.rows.iter().filter(|r| r.verdict == Verdict::Fail).map(|r| {
            format!(
                "{} n={} t={}: ks={} threshold={}",
                r.statistic,
                r.n,
                fmt_opt(r.t),
                fmt_opt(r.ks),
                fmt_opt(r.threshold)
            )
        });
        let checks = self
            .checks
            .iter()
            .filter(|c| c.verdict == Verdict::Fail)
            .map(|c| format!("{}: value={} threshold={}", c.name, c.value, fmt_opt(c.threshold)));
        rows.chain(checks).collect()
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }

    pub fn row(&self, statistic: &str, n: u64, t: f64) -> Option<&StatRow> {
        self.rows
            .iter()
            .find(|r| r.statistic == statistic && r.n == n && r.t == Some(t))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-replicate CSV with columns `target,n,t,replicate,raw,normalized`.
    /// `header`, if given, is written first as a `#` comment line.
    pub fn write_csv<W: Write>(&self, mut out: W, header: Option<&str>) -> Result<()> {
        if let Some(h) = header {
            writeln!(out, "# {h}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["target", "n", "t", "replicate", "raw", "normalized"])?;
        for s in &self.samples {
            let target = if s.series.is_empty() {
                self.target.to_string()
            } else {
                format!("{}:{}", self.target, s.series)
            };
            w.write_record([
                target,
                s.n.to_string(),
                s.t.map(|t| t.to_string()).unwrap_or_default(),
                s.replicate.to_string(),
                s.raw.to_string(),
                s.normalized.to_string(),
            ])?;
        }
        w.flush().map_err(SieveError::from)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}
