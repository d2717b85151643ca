//! Replicated experiments for the limit theorems: build samples, normalize,
//! test against the limit laws and collect verdicts.

mod ewens;
mod oracle;
mod prw;
mod report;
mod sieve;
mod spec;

pub use ewens::run_esf_flt;
pub use oracle::{connection_oracle, OraclePoint, OracleReport};
pub use prw::{run_prw_flt, run_prw_properties};
pub use report::{Check, ExperimentReport, SampleRecord, StatRow, Verdict, CALIBRATION_NOTE};
pub use sieve::{run_bound_check, run_ratio_flt, run_sieve_flt, sup_ratio_deviation};
pub use spec::{CycleSampler, ExperimentSpec, IncrementSpec, NormalizerSpec, Target, WindowSpec};

pub use crate::stats::{ks_one_sample, ks_two_sample};

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Result, SieveError};
use crate::rng::RngStream;
use crate::special::normal_cdf;
use crate::stats::{correlation, mean, median, variance};

const REFERENCE_BLOCK: u32 = 0x4000_0000;
const NULL_BLOCK: u32 = 0x6000_0000;
const SIEVE_BLOCK: u32 = 0x2000_0000;
/// Offset separating the block ranges of two series within one experiment.
const SERIES_OFFSET: u32 = 0x100;

/// Dispatch on the experiment's target.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut report = match spec.target {
        Target::A1 | Target::A2 | Target::A3 | Target::T22 if spec.ratio => run_ratio_flt(spec),
        Target::A1 | Target::A2 | Target::A3 | Target::T22 => run_sieve_flt(spec),
        Target::P21 => run_ratio_flt(spec),
        Target::B1 | Target::B2 | Target::B3 | Target::B4 => run_prw_flt(spec),
        Target::P31 | Target::P32 | Target::P33 => run_prw_properties(spec),
        Target::P41 => run_bound_check(spec),
        Target::EQ | Target::EsfFlt => run_esf_flt(spec),
    }?;
    report.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Affine normalization `z = (raw - center) / scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalization {
    pub center: f64,
    pub scale: f64,
}

impl Normalization {
    pub fn new(center: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite() && center.is_finite()) {
            return Err(SieveError::Range(format!(
                "normalization needs a finite center and positive scale, got ({center}, {scale})"
            )));
        }
        Ok(Normalization { center, scale })
    }

    pub fn apply(&self, raw: f64) -> f64 {
        (raw - self.center) / self.scale
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.scale + self.center
    }

    /// `apply`, verifying that `invert` recovers `raw` to 1e-9 relative.
    pub fn checked(&self, raw: f64) -> Result<f64> {
        let z = self.apply(raw);
        let back = self.invert(z);
        let tol = 1e-9 * raw.abs().max(self.center.abs()).max(f64::MIN_POSITIVE);
        if (back - raw).abs() > tol {
            return Err(SieveError::Constraint(format!(
                "normalization identity failed: raw {raw}, recovered {back}"
            )));
        }
        Ok(z)
    }
}

/// `count` values from `f`, the `i`-th drawn on stream `(seed, block, i)`.
pub(crate) fn par_draws<T, F>(seed: u64, block: u32, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut RngStream) -> Result<T> + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|i| f(&mut RngStream::replicate(seed, block, i as u32)))
        .collect()
}

/// Limit law of one normalized marginal, with a null sample drawn from it.
pub(crate) enum Limit {
    /// `N(0, var)`, tested one-sample.
    Normal { var: f64, null: Vec<f64> },
    /// Tested two-sample against `reference`.
    Draws { reference: Vec<f64>, null: Vec<f64> },
    /// Point mass; reported only.
    Degenerate,
}

impl Limit {
    pub(crate) fn normal(var: f64, seed: u64, block: u32, count: usize) -> Result<Limit> {
        if var == 0.0 {
            return Ok(Limit::Degenerate);
        }
        let sd = var.sqrt();
        let null = par_draws(seed, NULL_BLOCK + block, count, |rng| {
            Ok(sd * rng.sample::<f64, _>(rand_distr::StandardNormal))
        })?;
        Ok(Limit::Normal { var, null })
    }

    pub(crate) fn draws<F>(seed: u64, block: u32, reference: usize, null: usize, f: F) -> Result<Limit>
    where
        F: Fn(&mut RngStream) -> Result<f64> + Sync,
    {
        Ok(Limit::Draws {
            reference: par_draws(seed, REFERENCE_BLOCK + block, reference, &f)?,
            null: par_draws(seed, NULL_BLOCK + block, null, &f)?,
        })
    }

    pub(crate) fn ks(&self, values: &[f64]) -> Result<Option<f64>> {
        match self {
            Limit::Normal { var, .. } => {
                let sd = var.sqrt();
                ks_one_sample(values, |x| normal_cdf(x / sd)).map(Some)
            }
            Limit::Draws { reference, .. } => ks_two_sample(values, reference).map(Some),
            Limit::Degenerate => Ok(None),
        }
    }

    pub(crate) fn null_ks(&self) -> Result<Option<f64>> {
        match self {
            Limit::Normal { null, .. } | Limit::Draws { null, .. } => self.ks(null),
            Limit::Degenerate => Ok(None),
        }
    }
}

/// Replicate values of one statistic at one `(n, t)`.
pub(crate) struct Series {
    pub n: u64,
    pub t: Option<f64>,
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}

impl Series {
    pub(crate) fn new(n: u64, t: Option<f64>, raw: Vec<f64>, norm: Option<Normalization>) -> Result<Series> {
        let normalized = match norm {
            Some(nm) => raw.iter().map(|&r| nm.checked(r)).collect::<Result<_>>()?,
            None => raw.clone(),
        };
        Ok(Series { n, t, raw, normalized })
    }

    pub(crate) fn record(&self, report: &mut ExperimentReport, series: &str) {
        report.samples.extend(self.raw.iter().zip(&self.normalized).enumerate().map(
            |(i, (&raw, &normalized))| SampleRecord {
                series: series.to_string(),
                n: self.n,
                t: self.t,
                replicate: i,
                raw,
                normalized,
            },
        ));
    }

    pub(crate) fn row(&self, statistic: &str, ks: Option<f64>, threshold: Option<f64>) -> StatRow {
        let v = &self.normalized;
        let verdict = match ks {
            Some(d) => Verdict::below(d, threshold),
            None => Verdict::Report,
        };
        StatRow {
            n: self.n,
            t: self.t,
            statistic: statistic.to_string(),
            replicates: v.len(),
            mean: mean(v),
            variance: if v.len() > 1 { variance(v) } else { 0.0 },
            median: median(v),
            ks,
            threshold: if ks.is_some() { threshold } else { None },
            verdict,
        }
    }
}

/// KS threshold at the `idx`-th of `count` values of `n`: `ks` applies at
/// every `n`, `ks_final` at the largest only; the smaller one wins.
pub(crate) fn ks_threshold(spec: &ExperimentSpec, idx: usize, count: usize) -> Option<f64> {
    let all = spec.threshold("ks");
    let last = if idx + 1 == count { spec.threshold("ks_final") } else { None };
    match (all, last) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// Test each `(n, t)` series against `limits[t]`, then add the null-model
/// guard per `t` and the KS trend check if requested.
pub(crate) fn evaluate_marginals(
    spec: &ExperimentSpec,
    report: &mut ExperimentReport,
    statistic: &str,
    series: &[Vec<Series>],
    limits: &[Limit],
) -> Result<()> {
    let count = series.len();
    let mut ks_by_t: Vec<Vec<Option<f64>>> = vec![Vec::new(); limits.len()];
    let mut strictest: Vec<Option<f64>> = vec![None; limits.len()];
    for (idx, per_t) in series.iter().enumerate() {
        let th = ks_threshold(spec, idx, count);
        for (j, s) in per_t.iter().enumerate() {
            let ks = limits[j].ks(&s.normalized)?;
            report.rows.push(s.row(statistic, ks, th));
            ks_by_t[j].push(ks);
            if ks.is_some() {
                strictest[j] = match (strictest[j], th) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                };
            }
        }
    }
    for (j, limit) in limits.iter().enumerate() {
        let t = spec.grid[j];
        if let Some(d) = limit.null_ks()? {
            report.check(
                format!("null model {statistic} t={t}"),
                d,
                strictest[j],
                Verdict::below(d, strictest[j]),
            );
        }
        if spec.threshold("ks_trend").is_some_and(|v| v != 0.0) && count > 1 {
            if let Some(ks) = ks_by_t[j].iter().copied().collect::<Option<Vec<f64>>>() {
                let worst = ks.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
                report.check(
                    format!("{statistic} ks strictly decreasing in n at t={t}"),
                    worst,
                    Some(0.0),
                    Verdict::below(worst, Some(0.0)),
                );
            }
        }
    }
    Ok(())
}

/// Brownian covariance `min(s,t)` and correlation `√(s/t)` checks on the
/// largest `n`, for every pair of positive grid points.
pub(crate) fn brownian_pair_checks(
    spec: &ExperimentSpec,
    report: &mut ExperimentReport,
    statistic: &str,
    last: &[Series],
) {
    let cov_tol = spec.threshold("cov_tol");
    let corr_tol = spec.threshold("corr_tol");
    if cov_tol.is_none() && corr_tol.is_none() {
        return;
    }
    for (i, a) in last.iter().enumerate() {
        for b in &last[i + 1..] {
            let (s, t) = (a.t.unwrap_or(0.0), b.t.unwrap_or(0.0));
            if s <= 0.0 {
                continue;
            }
            let (x, y) = (&a.normalized, &b.normalized);
            if let Some(tol) = cov_tol {
                let (mx, my) = (mean(x), mean(y));
                let cov = x.iter().zip(y).map(|(p, q)| (p - mx) * (q - my)).sum::<f64>()
                    / (x.len() as f64 - 1.0);
                let dev = (cov - s.min(t)).abs();
                report.check(
                    format!("{statistic} covariance at ({s}, {t}) = {cov:.4} vs {}", s.min(t)),
                    dev,
                    Some(tol),
                    Verdict::holds(dev <= tol),
                );
            }
            if let Some(tol) = corr_tol {
                let r = correlation(x, y);
                let target = (s / t).sqrt();
                let dev = (r - target).abs();
                report.check(
                    format!("{statistic} correlation at ({s}, {t}) = {r:.4} vs {target:.4}"),
                    dev,
                    Some(tol),
                    Verdict::holds(dev <= tol),
                );
            }
        }
    }
}

/// Strictly decreasing check on per-`n` summary values.
pub(crate) fn decreasing_check(report: &mut ExperimentReport, name: &str, values: &[f64]) {
    if values.len() < 2 {
        return;
    }
    let worst = values.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    report.check(name, worst, Some(0.0), Verdict::below(worst, Some(0.0)));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_roundtrip() {
        let nm = Normalization::new(1e8, 3.5).unwrap();
        let z = nm.checked(1e8 + 7.0).unwrap();
        assert_eq!(z, 2.0);
        assert_eq!(nm.invert(z), 1e8 + 7.0);
        assert!(Normalization::new(0.0, 0.0).is_err());
        assert_eq!(Normalization::new(0.0, 2.0).unwrap().checked(0.0).unwrap(), 0.0);
    }

    #[test]
    fn draws_are_order_independent() {
        let a = par_draws(5, 1, 100, |rng| Ok(rng.random::<u64>())).unwrap();
        let b: Vec<u64> = (0..100)
            .map(|i| RngStream::replicate(5, 1, i).random::<u64>())
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn null_model_normal_passes_its_own_test() {
        let lim = Limit::normal(0.5, 1, 0, 4000).unwrap();
        let d = lim.null_ks().unwrap().unwrap();
        assert!(d < 0.03, "{d}");
        assert!(Limit::normal(0.0, 1, 0, 10).unwrap().null_ks().unwrap().is_none());
    }

    #[test]
    fn threshold_selection() {
        let mut spec = ExperimentSpec::new(Target::A1, vec![10, 100], 10, vec![1.0], 0);
        spec.thresholds.insert("ks".into(), 0.12);
        spec.thresholds.insert("ks_final".into(), 0.08);
        assert_eq!(ks_threshold(&spec, 0, 2), Some(0.12));
        assert_eq!(ks_threshold(&spec, 1, 2), Some(0.08));
    }
}
