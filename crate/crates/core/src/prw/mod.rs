//! Perturbed random walks `T_k = S_{k-1} + η_k`, their visit counts `N(x)`
//! and renewal counts `ν(t)`, and Monte Carlo checks of the strong law,
//! the window growth bound and the visit increment bound.

mod law;
mod path;

pub use law::{Dependence, EtaLaw, StepLaw, XiLaw};
pub use path::PrwPath;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result, SieveError};
use crate::stats::{mean, quantile, std_error};

/// `N(x)` from a fresh walk.
pub fn count_visits<R: Rng + ?Sized>(law: &StepLaw, x: f64, rng: &mut R) -> Result<u64> {
    if !(x >= 0.0) {
        return param_err(format!("visit level must be nonnegative, got {x}"));
    }
    PrwPath::simulate(law, x, rng)?.visits(x)
}

/// `ν(t)` from a fresh walk; zero for `t < 0`.
pub fn count_renewals<R: Rng + ?Sized>(law: &StepLaw, t: f64, rng: &mut R) -> Result<u64> {
    if t < 0.0 {
        return Ok(0);
    }
    PrwPath::simulate(law, t, rng)?.renewals(t)
}

/// `(N(n t))_{t ∈ grid}` from one walk.
pub fn visit_process<R: Rng + ?Sized>(
    law: &StepLaw,
    n: f64,
    grid: &[f64],
    rng: &mut R,
) -> Result<Vec<u64>> {
    if !(n > 0.0) {
        return param_err("scale n must be positive");
    }
    if grid.windows(2).any(|w| w[1] < w[0]) || grid.iter().any(|&t| !(t >= 0.0)) {
        return param_err("grid must be sorted and nonnegative");
    }
    let top = grid.last().copied().unwrap_or(0.0) * n;
    let path = PrwPath::simulate(law, top, rng)?;
    grid.iter().map(|&t| path.visits(n * t)).collect()
}

/// Summary of one Monte Carlo sample of a statistic at a given `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub n: f64,
    pub median: f64,
    pub q90: f64,
    pub q95: f64,
    pub max: f64,
    pub values: Vec<f64>,
}

impl SampleSummary {
    fn new(n: f64, values: Vec<f64>) -> Self {
        SampleSummary {
            n,
            median: quantile(&values, 0.5),
            q90: quantile(&values, 0.9),
            q95: quantile(&values, 0.95),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            values,
        }
    }
}

/// `sup_{t ∈ grid} |m(N(n) - N(n(1-t)-))/n - t|` per replicate and `n`.
pub fn verify_lln_uniform<R: Rng + ?Sized>(
    law: &StepLaw,
    n_values: &[f64],
    replicates: usize,
    grid: &[f64],
    rng: &mut R,
) -> Result<Vec<SampleSummary>> {
    let m = law.mean_xi();
    if !m.is_finite() {
        return Err(SieveError::Configuration(
            "strong law check needs a finite mean step".into(),
        ));
    }
    if grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return param_err("grid must lie in [0,1]");
    }
    n_values
        .iter()
        .map(|&n| {
            let values = (0..replicates)
                .map(|_| {
                    let path = PrwPath::simulate(law, n, rng)?;
                    let top = path.visits(n)? as f64;
                    grid.iter().try_fold(0.0f64, |acc, &t| {
                        let low = path.visits_left(n * (1.0 - t))? as f64;
                        Ok(acc.max((m * (top - low) / n - t).abs()))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(SampleSummary::new(n, values))
        })
        .collect()
}

/// Largest number of `T_k` in a window `(x, x + b]` with `x ∈ [0, n]`.
///
/// The count only increases when `x + b` reaches some `T_k`, so the sup is a
/// max over `x = 0` and `x = T_k - b`.
pub fn max_window_count(path: &PrwPath, n: f64, b: f64) -> Result<u64> {
    if path.horizon() <= n + b {
        return Err(SieveError::Range("path too short for window scan".into()));
    }
    let t = path.sorted_t_values();
    let in_window = |x: f64| (t.partition_point(|&v| v <= x + b) - t.partition_point(|&v| v <= x)) as u64;
    let mut best = in_window(0.0);
    for &v in t {
        let x = v - b;
        if (0.0..=n).contains(&x) {
            best = best.max(in_window(x));
        }
    }
    Ok(best)
}

/// `n^{-c} sup_{t∈[0,1]} (N(nt + b) - N(nt))` per replicate and `n`.
pub fn verify_window_growth<R: Rng + ?Sized>(
    law: &StepLaw,
    n_values: &[f64],
    b: f64,
    c: f64,
    replicates: usize,
    rng: &mut R,
) -> Result<Vec<SampleSummary>> {
    if !(b > 0.0 && c > 0.0) {
        return param_err("window width b and exponent c must be positive");
    }
    n_values
        .iter()
        .map(|&n| {
            let values = (0..replicates)
                .map(|_| {
                    let path = PrwPath::simulate(law, n + b, rng)?;
                    Ok(max_window_count(&path, n, b)? as f64 * n.powf(-c))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(SampleSummary::new(n, values))
        })
        .collect()
}

/// Monte Carlo comparison of `E(N(x+y) - N(x))` with the renewal function `U(y) = Eν(y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncrementCheck {
    pub x: f64,
    pub y: f64,
    pub increment_mean: f64,
    pub increment_se: f64,
    pub renewal_mean: f64,
    pub renewal_se: f64,
    /// `increment_mean ≤ renewal_mean + 3·(combined stderr)`
    pub holds: bool,
}

pub fn verify_visit_increment_bound<R: Rng + ?Sized>(
    law: &StepLaw,
    x_values: &[f64],
    y_values: &[f64],
    replicates: usize,
    rng: &mut R,
) -> Result<Vec<IncrementCheck>> {
    if x_values.iter().chain(y_values).any(|&v| !(v >= 0.0)) {
        return param_err("x and y must be nonnegative");
    }
    if replicates < 2 {
        return param_err("need at least two replicates");
    }
    let mut out = Vec::new();
    for &x in x_values {
        for &y in y_values {
            let mut inc = Vec::with_capacity(replicates);
            let mut ren = Vec::with_capacity(replicates);
            for _ in 0..replicates {
                let path = PrwPath::simulate(law, x + y, rng)?;
                inc.push((path.visits(x + y)? - path.visits(x)?) as f64);
                ren.push(count_renewals(law, y, rng)? as f64);
            }
            let (im, ise) = (mean(&inc), std_error(&inc));
            let (rm, rse) = (mean(&ren), std_error(&ren));
            out.push(IncrementCheck {
                x,
                y,
                increment_mean: im,
                increment_se: ise,
                renewal_mean: rm,
                renewal_se: rse,
                holds: im <= rm + 3.0 * (ise * ise + rse * rse).sqrt(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::occupancy::{build_environment, rho};
    use crate::rng::RngStream;
    use crate::sampling::StickLaw;
    use crate::stats::{correlation, ks_two_sample};
    use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Poisson};

    fn deterministic() -> StepLaw {
        StepLaw::independent(XiLaw::Constant { value: 1.0 }, EtaLaw::Constant { value: 0.5 }).unwrap()
    }

    #[test]
    fn deterministic_walk_counts() {
        let mut rng = RngStream::new(1, 0);
        let law = deterministic();
        assert_eq!(count_visits(&law, 2.0, &mut rng).unwrap(), 2);
        assert_eq!(count_visits(&law, 0.0, &mut rng).unwrap(), 0);
        assert_eq!(count_visits(&law, 0.5, &mut rng).unwrap(), 1);
        for &t in &[0.0, 0.3, 1.0, 2.7, 10.0] {
            assert_eq!(count_renewals(&law, t, &mut rng).unwrap(), t.floor() as u64 + 1);
        }
        assert_eq!(count_renewals(&law, -0.1, &mut rng).unwrap(), 0);
    }

    #[test]
    fn mean_visits_exponential() {
        let mut rng = RngStream::new(2, 0);
        let law = StepLaw::exp_exp();
        let xs: Vec<f64> = (0..100_000).map(|_| count_visits(&law, 10.0, &mut rng).unwrap() as f64).collect();
        // Poisson renewals: U(dy) = δ_0 + dy, so E N(x) = F(x) + ∫_0^x F(u) du
        let quad = crate::quad::integrate(|u| 1.0 - (-u).exp(), 0.0, 10.0, 1e-12);
        let centering = 10.0 - 1.0 + (-10.0f64).exp();
        assert!((quad - centering).abs() < 1e-9);
        let exact = quad + law.eta_cdf(10.0);
        let (m, se) = (mean(&xs), std_error(&xs));
        assert!((m - exact).abs() < 3.0 * se, "{m} ± {se} vs {exact}");
    }

    #[test]
    fn renewals_are_shifted_poisson() {
        let mut rng = RngStream::new(3, 0);
        let law = StepLaw::exp_exp();
        let reps = 100_000;
        let mut hist = vec![0u64; 40];
        for _ in 0..reps {
            let v = count_renewals(&law, 5.0, &mut rng).unwrap() as usize;
            hist[(v - 1).min(39)] += 1;
        }
        let pois = Poisson::new(5.0).unwrap();
        // pool the tail where expected counts are small
        let (mut stat, mut cells) = (0.0, 0);
        let mut tail_obs = 0.0;
        let mut tail_exp = 0.0;
        for (k, &obs) in hist.iter().enumerate() {
            let e = pois.pmf(k as u64) * reps as f64;
            if k >= 14 {
                tail_obs += obs as f64;
                tail_exp += e;
                continue;
            }
            stat += (obs as f64 - e).powi(2) / e;
            cells += 1;
        }
        tail_exp += (1.0 - pois.cdf(39)) * reps as f64;
        stat += (tail_obs - tail_exp).powi(2) / tail_exp;
        cells += 1;
        let p = 1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat);
        assert!(p > 1e-3, "chi-square {stat}, p = {p}");
    }

    #[test]
    fn visits_never_exceed_renewals() {
        let mut rng = RngStream::new(4, 0);
        for law in [StepLaw::exp_exp(), StepLaw::shared_stick(StickLaw::beta(0.7).unwrap()).unwrap()] {
            for _ in 0..2000 {
                let p = PrwPath::simulate(&law, 30.0, &mut rng).unwrap();
                for i in 0..30 {
                    let x = i as f64 + 0.37;
                    assert!(p.visits(x).unwrap() <= p.renewals(x).unwrap());
                }
            }
        }
    }

    #[test]
    fn constant_eta_shifts_renewals() {
        let mut rng = RngStream::new(5, 0);
        let c = 0.75;
        let law = StepLaw::independent(XiLaw::Exponential { rate: 2.0 }, EtaLaw::Constant { value: c }).unwrap();
        for _ in 0..2000 {
            let p = PrwPath::simulate(&law, 20.0, &mut rng).unwrap();
            for i in 0..=40 {
                let x = i as f64 * 0.5;
                assert_eq!(p.visits(x).unwrap(), p.renewals(x - c).unwrap());
            }
        }
    }

    #[test]
    fn visit_process_single_point_matches_count() {
        let law = StepLaw::exp_exp();
        let n = 50.0;
        // identical streams give identical realizations
        let mut a = Vec::new();
        let mut b = Vec::new();
        for i in 0..10_000 {
            let mut r1 = RngStream::new(6, i);
            let mut r2 = RngStream::new(6, i);
            a.push(visit_process(&law, n, &[1.0], &mut r1).unwrap()[0] as f64);
            b.push(count_visits(&law, n, &mut r2).unwrap() as f64);
        }
        assert!(ks_two_sample(&a, &b).unwrap() < 0.01);
        // independent streams agree in law
        let mut rng = RngStream::new(7, 0);
        let a: Vec<f64> = (0..100_000).map(|_| visit_process(&law, n, &[1.0], &mut rng).unwrap()[0] as f64).collect();
        let b: Vec<f64> = (0..100_000).map(|_| count_visits(&law, n, &mut rng).unwrap() as f64).collect();
        assert!(ks_two_sample(&a, &b).unwrap() < 0.01);
    }

    #[test]
    fn visit_process_paths_monotone_with_unit_jumps_or_more() {
        let mut rng = RngStream::new(8, 0);
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        for _ in 0..500 {
            let v = visit_process(&StepLaw::exp_exp(), 200.0, &grid, &mut rng).unwrap();
            assert!(v.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn increments_nearly_uncorrelated() {
        let mut rng = RngStream::new(9, 0);
        let n = 10_000.0;
        let mut first = Vec::new();
        let mut second = Vec::new();
        for _ in 0..10_000 {
            let v = visit_process(&StepLaw::exp_exp(), n, &[0.0, 0.5, 1.0], &mut rng).unwrap();
            first.push((v[1] - v[0]) as f64);
            second.push((v[2] - v[1]) as f64);
        }
        assert!(correlation(&first, &second).abs() < 0.05);
    }

    #[test]
    fn sieve_rho_equals_visits_at_log() {
        let mut rng = RngStream::new(10, 0);
        let law = StickLaw::beta(1.0).unwrap();
        for _ in 0..200 {
            let env = build_environment(&law, 1e-12, &mut rng).unwrap();
            let path = PrwPath::from_environment(&env);
            for _ in 0..50 {
                let x = (rng.random::<f64>() * 8.0 * 10f64.ln()).exp();
                assert_eq!(rho(&env, x).unwrap(), path.visits(x.ln()).unwrap(), "x = {x}");
            }
        }
    }

    #[test]
    fn lln_deterministic_walk() {
        let mut rng = RngStream::new(11, 0);
        let grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        let rows = verify_lln_uniform(&deterministic(), &[1000.0], 5, &grid, &mut rng).unwrap();
        assert!(rows[0].max <= 2e-3, "{}", rows[0].max);
        let rows = verify_lln_uniform(&StepLaw::exp_exp(), &[100.0], 50, &[0.0], &mut rng).unwrap();
        assert!(rows[0].values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lln_medians_decrease() {
        let mut rng = RngStream::new(12, 0);
        let grid: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
        let rows = verify_lln_uniform(&StepLaw::exp_exp(), &[1e2, 1e3, 1e4, 1e5], 200, &grid, &mut rng).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].median < w[0].median, "{} then {}", w[0].median, w[1].median);
        }
        let heavy = StepLaw::independent(XiLaw::Pareto { alpha: 0.7 }, EtaLaw::Constant { value: 1.0 }).unwrap();
        assert!(matches!(
            verify_lln_uniform(&heavy, &[10.0], 10, &grid, &mut rng),
            Err(SieveError::Configuration(_))
        ));
    }

    #[test]
    fn window_scan_matches_dense_grid() {
        let mut rng = RngStream::new(13, 0);
        for _ in 0..300 {
            let p = PrwPath::simulate(&StepLaw::exp_exp(), 60.0, &mut rng).unwrap();
            let exact = max_window_count(&p, 50.0, 1.0).unwrap();
            let dense = (0..=50_000)
                .map(|i| {
                    let x = i as f64 * 1e-3;
                    p.visits(x + 1.0).unwrap() - p.visits(x).unwrap()
                })
                .max()
                .unwrap();
            assert!(dense <= exact);
            assert!(exact - dense <= 1);
        }
    }

    #[test]
    fn window_growth_deterministic_and_trend() {
        let mut rng = RngStream::new(14, 0);
        let rows = verify_window_growth(&deterministic(), &[100.0, 1000.0], 0.1, 0.5, 5, &mut rng).unwrap();
        for r in &rows {
            assert!(r.max <= r.n.powf(-0.5) + 1e-15);
        }
        let rows = verify_window_growth(&StepLaw::exp_exp(), &[1e2, 1e3, 1e4], 1.0, 0.5, 1000, &mut rng).unwrap();
        assert!(rows.iter().all(|r| r.values.iter().all(|&v| v >= 0.0)));
        for w in rows.windows(2) {
            assert!(w[1].q95 < w[0].q95);
        }
        assert!(verify_window_growth(&deterministic(), &[10.0], 0.0, 0.5, 5, &mut rng).is_err());
    }

    #[test]
    fn increment_bound_exponential() {
        let mut rng = RngStream::new(15, 0);
        let rows = verify_visit_increment_bound(&StepLaw::exp_exp(), &[5.0], &[0.0, 1.0, 2.0, 4.0], 20_000, &mut rng).unwrap();
        assert!(rows.iter().all(|r| r.holds));
        assert_eq!(rows[0].increment_mean, 0.0);
        assert_eq!(rows[0].renewal_mean, 1.0);
        let r2 = &rows[2];
        // U(y) = y + 1 for the Poisson renewal process
        assert!((r2.renewal_mean - 3.0).abs() < 3.0 * r2.renewal_se);
        assert!(r2.increment_mean < r2.renewal_mean);
        for w in rows.windows(2) {
            assert!(w[0].increment_mean <= w[1].increment_mean + 3.0 * w[1].increment_se);
        }
    }
}
