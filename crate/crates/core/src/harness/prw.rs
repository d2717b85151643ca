use super::report::{ExperimentReport, Verdict};
use super::spec::{ExperimentSpec, Target};
use super::{
    brownian_pair_checks, decreasing_check, evaluate_marginals, ks_two_sample, par_draws, Limit,
    Normalization, Series,
};
use crate::error::{Result, SieveError};
use crate::limits::{centering_prw, normalizer_c, NormalizerKind};
use crate::prw::{verify_lln_uniform, verify_visit_increment_bound, verify_window_growth, visit_process, StepLaw};
use crate::rng::RngStream;
use crate::sampling::{sample_inverse_subordinator_marginal, sample_spectrally_negative_stable};
use crate::stats::median;

/// `(center, scale)` of `N(nt)` for the B targets.
fn prw_normalization(spec: &ExperimentSpec, law: &StepLaw, n: u64, t: f64) -> Result<Normalization> {
    let nf = n as f64;
    let m = law.mean_xi();
    let ell = spec.slow_variation();
    let alpha = spec.pareto_alpha().unwrap_or(f64::NAN);
    let center = if spec.target == Target::B4 {
        0.0
    } else {
        centering_prw(&law.eta, nf, t, m)?
    };
    let scale = match spec.target {
        Target::B1 => (law.var_xi() * nf / m.powi(3)).sqrt(),
        Target::B2 => m.powf(-1.5) * normalizer_c(&NormalizerKind::FiniteVarianceBoundary { ell }, nf)?,
        Target::B3 => m.powf(-(alpha + 1.0) / alpha) * normalizer_c(&NormalizerKind::Stable { alpha, ell }, nf)?,
        Target::B4 => nf.powf(alpha) / ell.eval(nf),
        other => return Err(SieveError::Configuration(format!("{other} is not a walk limit target"))),
    };
    Normalization::new(center, scale)
}

/// Marginals of the normalized visit process `N(nt)` against the limit process.
pub fn run_prw_flt(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    if !matches!(spec.target, Target::B1 | Target::B2 | Target::B3 | Target::B4) {
        return Err(SieveError::Configuration(format!("target {} is not a walk limit target", spec.target)));
    }
    let law = spec.step_law()?;
    let mut report = ExperimentReport::new(spec.target, spec.seed, spec.replicates, &spec.n_values);
    let mut series = Vec::new();
    for (idx, &n) in spec.n_values.iter().enumerate() {
        let paths = par_draws(spec.seed, idx as u32, spec.replicates, |rng| {
            visit_process(law, n as f64, &spec.grid, rng)
        })?;
        let mut per_t = Vec::new();
        for (j, &t) in spec.grid.iter().enumerate() {
            let raw = paths.iter().map(|p| p[j] as f64).collect();
            let ser = Series::new(n, Some(t), raw, Some(prw_normalization(spec, law, n, t)?))?;
            ser.record(&mut report, "");
            per_t.push(ser);
        }
        series.push(per_t);
    }
    let alpha = spec.pareto_alpha().unwrap_or(f64::NAN);
    let limits = spec
        .grid
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let block = j as u32;
            if t == 0.0 {
                return Ok(Limit::Degenerate);
            }
            match spec.target {
                Target::B1 | Target::B2 => Limit::normal(t, spec.seed, block, spec.replicates),
                Target::B3 => Limit::draws(spec.seed, block, spec.reference_draws, spec.replicates, |rng| {
                    Ok(t.powf(1.0 / alpha) * sample_spectrally_negative_stable(alpha, rng)?)
                }),
                _ => Limit::draws(spec.seed, block, spec.reference_draws, spec.replicates, |rng| {
                    sample_inverse_subordinator_marginal(alpha, t, rng)
                }),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    evaluate_marginals(spec, &mut report, "marginal", &series, &limits)?;
    if let Some(last) = series.last() {
        if matches!(spec.target, Target::B1 | Target::B2) {
            brownian_pair_checks(spec, &mut report, "marginal", last);
        }
        if spec.target == Target::B4 {
            self_similarity_checks(spec, &mut report, alpha, last)?;
        }
    }
    Ok(report)
}

/// `W^←(t) =d (t/T)^α W^←(T)`: compare the statistic at each `t` with the
/// rescaled statistic at the last grid point `T`.
fn self_similarity_checks(spec: &ExperimentSpec, report: &mut ExperimentReport, alpha: f64, last: &[Series]) -> Result<()> {
    let Some(top) = last.last() else { return Ok(()) };
    let big_t = top.t.unwrap_or(1.0);
    let th = spec.threshold("self_similarity_ks");
    for s in &last[..last.len() - 1] {
        let t = s.t.unwrap_or(0.0);
        if t <= 0.0 {
            continue;
        }
        let scaled: Vec<f64> = top.normalized.iter().map(|v| (t / big_t).powf(alpha) * v).collect();
        let d = ks_two_sample(&s.normalized, &scaled)?;
        report.check(
            format!("self-similarity ks between t={t} and (t/{big_t})^alpha x t={big_t}"),
            d,
            th,
            Verdict::below(d, th),
        );
    }
    Ok(())
}

/// Uniform strong law (P31), window growth (P32) and visit increment bound (P33).
pub fn run_prw_properties(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let law = spec.step_law()?;
    let mut report = ExperimentReport::new(spec.target, spec.seed, spec.replicates, &spec.n_values);
    let mut rng = RngStream::replicate(spec.seed, 0, 0);
    let ns: Vec<f64> = spec.n_values.iter().map(|&n| n as f64).collect();
    match spec.target {
        Target::P31 | Target::P32 => {
            let (summaries, stat) = if spec.target == Target::P31 {
                (verify_lln_uniform(law, &ns, spec.replicates, &spec.grid, &mut rng)?, "sup_lln_deviation")
            } else {
                let w = spec
                    .window
                    .ok_or_else(|| SieveError::Configuration("P32 needs a [window]".into()))?;
                (verify_window_growth(law, &ns, w.b, w.c, spec.replicates, &mut rng)?, "scaled_window_count")
            };
            for (s, &n) in summaries.iter().zip(&spec.n_values) {
                let ser = Series::new(n, None, s.values.clone(), None)?;
                ser.record(&mut report, "");
                report.rows.push(ser.row(stat, None, None));
                report.check(format!("{stat} q95 n={n}"), s.q95, None, Verdict::Report);
            }
            if spec.target == Target::P31 {
                let medians: Vec<f64> = summaries.iter().map(|s| median(&s.values)).collect();
                decreasing_check(&mut report, "median sup_lln_deviation strictly decreasing in n", &medians);
                if let (Some(th), Some(&last)) = (spec.threshold("median_max"), medians.last()) {
                    report.check("median sup_lln_deviation at largest n", last, Some(th), Verdict::below(last, Some(th)));
                }
            } else {
                let q95: Vec<f64> = summaries.iter().map(|s| s.q95).collect();
                decreasing_check(&mut report, "q95 scaled_window_count strictly decreasing in n", &q95);
            }
        }
        Target::P33 => {
            let inc = spec
                .increments
                .as_ref()
                .ok_or_else(|| SieveError::Configuration("P33 needs [increments]".into()))?;
            let checks = verify_visit_increment_bound(law, &inc.x_values, &inc.y_values, spec.replicates, &mut rng)?;
            for c in checks {
                let se = (c.increment_se.powi(2) + c.renewal_se.powi(2)).sqrt();
                report.check(
                    format!("E(N(x+y)-N(x)) <= U(y) + 3 stderr at x={}, y={}", c.x, c.y),
                    c.increment_mean,
                    Some(c.renewal_mean + 3.0 * se),
                    Verdict::holds(c.holds),
                );
            }
        }
        other => {
            return Err(SieveError::Configuration(format!("target {other} is not a walk property")));
        }
    }
    Ok(report)
}
