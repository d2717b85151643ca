use super::report::{ExperimentReport, Verdict};
use super::spec::{CycleSampler, ExperimentSpec, Target};
use super::{
    brownian_pair_checks, evaluate_marginals, ks_two_sample, par_draws, Limit, Normalization,
    Series, SIEVE_BLOCK,
};
use crate::error::{Result, SieveError};
use crate::ewens::{c_process, sample_cycles_crp, sample_cycles_feller, sample_cycles_feller_skip};
use crate::occupancy::{k_process, occupy_sieve, SieveEnvironment};
use crate::sampling::StickLaw;

/// Functional limit theorem for the cycle counts `C_n(t)` (ESF_FLT) and the
/// distributional identity `C_n(t) =d K*_n(t)` for the Beta(θ,1) sieve (EQ).
pub fn run_esf_flt(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    if !matches!(spec.target, Target::EQ | Target::EsfFlt) {
        return Err(SieveError::Configuration(format!("target {} is not an Ewens target", spec.target)));
    }
    let theta = spec.theta_value()?;
    let mut report = ExperimentReport::new(spec.target, spec.seed, spec.replicates, &spec.n_values);
    let flt = spec.target == Target::EsfFlt;
    let compare = !flt || spec.compare_sieve;
    let law = StickLaw::beta(theta)?;
    let eq_th = spec.threshold("eq_ks");
    let mut series = Vec::new();
    for (idx, &n) in spec.n_values.iter().enumerate() {
        let cycles = par_draws(spec.seed, idx as u32, spec.replicates, |rng| {
            let counts = match spec.sampler {
                CycleSampler::Crp => sample_cycles_crp(n, theta, rng)?,
                CycleSampler::Feller => sample_cycles_feller(n, theta, rng)?,
                CycleSampler::FellerSkip => sample_cycles_feller_skip(n, theta, rng)?,
            };
            c_process(&counts, &spec.grid)
        })?;
        let sieve = if compare {
            let out = par_draws(spec.seed, SIEVE_BLOCK + idx as u32, spec.replicates, |rng| {
                let mut env = SieveEnvironment::empty(law.clone())?;
                let occ = occupy_sieve(&mut env, n, rng)?;
                Ok((k_process(&occ, &spec.grid)?.values, occ.regimes))
            })?;
            for (_, r) in &out {
                report.regimes.merge(r);
            }
            Some(out.into_iter().map(|(v, _)| v).collect::<Vec<_>>())
        } else {
            None
        };
        let ln_n = (n as f64).ln();
        let mut per_t = Vec::new();
        for (j, &t) in spec.grid.iter().enumerate() {
            let raw: Vec<f64> = cycles.iter().map(|c| c[j] as f64).collect();
            let norm = if flt {
                if n < 2 {
                    return Err(SieveError::Configuration("ESF_FLT needs n >= 2".into()));
                }
                Some(Normalization::new(theta * t * ln_n, (theta * ln_n).sqrt())?)
            } else {
                None
            };
            let ewens = Series::new(n, Some(t), raw, norm)?;
            ewens.record(&mut report, if flt { "" } else { "ewens" });
            if let Some(sv) = &sieve {
                let k = Series::new(n, Some(t), sv.iter().map(|v| v[j] as f64).collect(), None)?;
                k.record(&mut report, "sieve");
                let d = ks_two_sample(&ewens.raw, &k.raw)?;
                let mut row = k.row("sieve_vs_ewens_raw", Some(d), eq_th);
                row.verdict = Verdict::below(d, eq_th);
                report.rows.push(row);
            }
            per_t.push(ewens);
        }
        series.push(per_t);
    }
    if flt {
        let limits = spec
            .grid
            .iter()
            .enumerate()
            .map(|(j, &t)| Limit::normal(t, spec.seed, j as u32, spec.replicates))
            .collect::<Result<Vec<_>>>()?;
        evaluate_marginals(spec, &mut report, "marginal", &series, &limits)?;
        if let Some(last) = series.last() {
            brownian_pair_checks(spec, &mut report, "marginal", last);
        }
    }
    Ok(report)
}
