//! Stable laws, the inverse stable subordinator, and Brownian marginals.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Exp1, Open01, StandardNormal};

use crate::error::{param_err, Result};
use crate::special::gamma;

fn check_subordinator_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return param_err(format!("subordinator index must lie in (0,1), got {alpha}"));
    }
    Ok(())
}

/// Positive stable `D` with `E e^{-zD} = e^{-z^α}` (Kanter's representation).
pub fn sample_standard_positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
    check_subordinator_alpha(alpha)?;
    Ok(kanter(alpha, rng))
}

#[inline]
fn kanter<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u: f64 = PI * rng.sample::<f64, _>(Open01);
    let e: f64 = rng.sample(Exp1);
    let a = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * u).sin() / e).powf((1.0 - alpha) / alpha);
    a * b
}

/// Chambers–Mallows–Stuck draw of the strictly stable law with
/// `E e^{iuX} = exp{-|u|^α (1 - iβ sgn(u) tan(πα/2))}`, `α ≠ 1`.
pub fn sample_stable_cms<R: Rng + ?Sized>(alpha: f64, beta: f64, rng: &mut R) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 2.0) || alpha == 1.0 {
        return param_err(format!("CMS index must lie in (0,2] without 1, got {alpha}"));
    }
    if !(-1.0..=1.0).contains(&beta) {
        return param_err(format!("skewness must lie in [-1,1], got {beta}"));
    }
    Ok(cms(alpha, beta, rng))
}

#[inline]
fn cms<R: Rng + ?Sized>(alpha: f64, beta: f64, rng: &mut R) -> f64 {
    let v = PI * (rng.sample::<f64, _>(Open01) - 0.5);
    let w: f64 = rng.sample(Exp1);
    let t = beta * (FRAC_PI_2 * alpha).tan();
    let b = t.atan() / alpha;
    let s = (1.0 + t * t).powf(0.5 / alpha);
    let av = alpha * (v + b);
    s * av.sin() / v.cos().powf(1.0 / alpha) * ((v - av).cos() / w).powf((1.0 - alpha) / alpha)
}

/// `Γ(1-α)^{1/α}`: scale taking `D` to `W_α(1)`.
pub fn positive_stable_scale(alpha: f64) -> f64 {
    gamma(1.0 - alpha).powf(1.0 / alpha)
}

/// `W_α(1)` for the subordinator with Laplace exponent `Γ(1-α) z^α`.
pub fn sample_positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
    check_subordinator_alpha(alpha)?;
    Ok(positive_stable_scale(alpha) * kanter(alpha, rng))
}

/// Scale σ with `σ^α = Γ(1-α)cos(πα/2)`; both factors are negative on (1,2).
pub fn spectrally_negative_scale(alpha: f64) -> f64 {
    (gamma(1.0 - alpha) * (FRAC_PI_2 * alpha).cos()).powf(1.0 / alpha)
}

/// Characteristic function `exp{-|u|^α Γ(1-α)(cos(πα/2) + i sin(πα/2) sgn u)}`
/// as `(re, im)`.
pub fn spectrally_negative_cf(alpha: f64, u: f64) -> (f64, f64) {
    let g = gamma(1.0 - alpha);
    let a = u.abs().powf(alpha);
    let re_exp = -a * g * (FRAC_PI_2 * alpha).cos();
    let im_exp = -a * g * (FRAC_PI_2 * alpha).sin() * u.signum();
    let m = re_exp.exp();
    (m * im_exp.cos(), m * im_exp.sin())
}

/// `S_α(1)` for the spectrally negative stable process, `α ∈ (1,2)`.
///
/// Realized as `σ·X` with `X` strictly stable, skewness -1.
pub fn sample_spectrally_negative_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return param_err(format!("spectrally negative index must lie in (1,2), got {alpha}"));
    }
    Ok(spectrally_negative_scale(alpha) * cms(alpha, -1.0, rng))
}

/// Exact draw of `W_α^←(t) = t^α / (Γ(1-α) D^α)`.
pub fn sample_inverse_subordinator_marginal<R: Rng + ?Sized>(
    alpha: f64,
    t: f64,
    rng: &mut R,
) -> Result<f64> {
    check_subordinator_alpha(alpha)?;
    if !(t > 0.0 && t.is_finite()) {
        return param_err(format!("inverse subordinator time must be positive, got {t}"));
    }
    let d = kanter(alpha, rng);
    Ok(t.powf(alpha) / (gamma(1.0 - alpha) * d.powf(alpha)))
}

/// A first-passage query on a simulated subordinator path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PassageQuery {
    pub level: f64,
    /// `true` asks for the left limit `W^←(level-)`, i.e. passage to `≥ level`.
    pub left_limit: bool,
}

/// Simulate `W_α` on the lattice `k·step` and answer passage queries.
///
/// Each answer is the lattice point just before the first index `k` with
/// `W_α(k·step) > level` (or `≥ level` for left limits), so `W^←(0) = 0`.
/// Queries may come in any order.
pub fn subordinator_passages<R: Rng + ?Sized>(
    alpha: f64,
    queries: &[PassageQuery],
    step: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_subordinator_alpha(alpha)?;
    if !(step > 0.0 && step.is_finite()) {
        return param_err(format!("lattice step must be positive, got {step}"));
    }
    if queries.iter().any(|q| !(q.level >= 0.0 && q.level.is_finite())) {
        return param_err("passage levels must be finite and nonnegative");
    }
    let mut order: Vec<usize> = (0..queries.len()).collect();
    // left limits come first at equal levels: `≥` is reached no later than `>`
    order.sort_by(|&a, &b| {
        queries[a]
            .level
            .total_cmp(&queries[b].level)
            .then(queries[b].left_limit.cmp(&queries[a].left_limit))
    });
    let incr_scale = (step * gamma(1.0 - alpha)).powf(1.0 / alpha);
    let mut out = vec![0.0; queries.len()];
    let mut k: u64 = 0;
    let mut level = 0.0;
    for idx in order {
        let q = queries[idx];
        let passed = |w: f64| if q.left_limit { w >= q.level } else { w > q.level };
        while k == 0 || !passed(level) {
            level += incr_scale * kanter(alpha, rng);
            k += 1;
        }
        out[idx] = (k - 1) as f64 * step;
    }
    Ok(out)
}

/// `W_α^←(t)` at each grid time from one discretized path; nondecreasing in `t`.
pub fn sample_inverse_subordinator_path<R: Rng + ?Sized>(
    alpha: f64,
    grid: &[f64],
    step: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return param_err("grid must be sorted");
    }
    let queries: Vec<PassageQuery> = grid
        .iter()
        .map(|&level| PassageQuery {
            level,
            left_limit: false,
        })
        .collect();
    subordinator_passages(alpha, &queries, step, rng)
}

/// Standard Brownian motion at the grid times (with `B(0) = 0`).
pub fn sample_brownian_marginals<R: Rng + ?Sized>(grid: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if grid.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
        return param_err("brownian grid times must be finite and nonnegative");
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return param_err("brownian grid must be sorted");
    }
    let mut prev_t = 0.0;
    let mut b = 0.0;
    Ok(grid
        .iter()
        .map(|&t| {
            let dt = t - prev_t;
            if dt > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                b += dt.sqrt() * z;
            }
            prev_t = t;
            b
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn ks2(a: &[f64], b: &[f64]) -> f64 {
        crate::stats::ks_two_sample(a, b).unwrap()
    }

    fn draws(m: usize, mut f: impl FnMut() -> f64) -> Vec<f64> {
        (0..m).map(|_| f()).collect()
    }

    #[test]
    fn rejects_out_of_range_indices() {
        let mut rng = RngStream::new(0, 0);
        assert!(sample_standard_positive_stable(1.0, &mut rng).is_err());
        assert!(sample_positive_stable(0.0, &mut rng).is_err());
        assert!(sample_spectrally_negative_stable(1.0, &mut rng).is_err());
        assert!(sample_spectrally_negative_stable(2.0, &mut rng).is_err());
        assert!(sample_inverse_subordinator_marginal(0.5, 0.0, &mut rng).is_err());
        assert!(sample_inverse_subordinator_path(0.5, &[1.0, 0.5], 1e-3, &mut rng).is_err());
        assert!(sample_brownian_marginals(&[0.5, 0.2], &mut rng).is_err());
    }

    #[test]
    fn standard_positive_stable_laplace_at_one() {
        let mut rng = RngStream::new(1, 0);
        let m = 1_000_000;
        let mean = (0..m)
            .map(|_| (-sample_standard_positive_stable(0.5, &mut rng).unwrap()).exp())
            .sum::<f64>()
            / m as f64;
        assert!((mean - (-1f64).exp()).abs() < 0.002, "{mean}");
    }

    #[test]
    fn subordinator_laplace_exponent() {
        let mut rng = RngStream::new(2, 0);
        let m = 1_000_000;
        let mean = (0..m)
            .map(|_| (-sample_positive_stable(0.5, &mut rng).unwrap()).exp())
            .sum::<f64>()
            / m as f64;
        // Γ(1/2) = √π from the closed form, independent of the Lanczos routine.
        let oracle = (-PI.sqrt()).exp();
        assert!((mean - oracle).abs() < 0.003, "{mean} vs {oracle}");
    }

    #[test]
    fn kanter_and_cms_agree() {
        let mut a = RngStream::new(3, 0);
        let mut b = RngStream::new(3, 1);
        let alpha: f64 = 0.5;
        let c = (FRAC_PI_2 * alpha).cos().powf(1.0 / alpha);
        let xs = draws(100_000, || sample_standard_positive_stable(alpha, &mut a).unwrap());
        let ys = draws(100_000, || c * sample_stable_cms(alpha, 1.0, &mut b).unwrap());
        let d = ks2(&xs, &ys);
        assert!(d < 0.01, "ks {d}");
    }

    #[test]
    fn spectrally_negative_mean_is_zero() {
        let mut rng = RngStream::new(4, 0);
        let alpha = 1.5;
        // mean of the cf-derived law: i·d/du φ(0) = 0; the central difference decays like h^{α-1}
        let h: f64 = 1e-10;
        let d_im = (spectrally_negative_cf(alpha, h).1 - spectrally_negative_cf(alpha, -h).1) / (2.0 * h);
        assert!(d_im.abs() < 10.0 * h.powf(alpha - 1.0));
        let m = 1_000_000;
        let xs = draws(m, || sample_spectrally_negative_stable(alpha, &mut rng).unwrap());
        let mean = xs.iter().sum::<f64>() / m as f64;
        // infinite variance: the sample mean fluctuates on the scale m^{1/α - 1}
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        let iqr = sorted[3 * m / 4] - sorted[m / 4];
        let scale = iqr * (m as f64).powf(1.0 / alpha - 1.0);
        assert!(mean.abs() < 5.0 * scale, "mean {mean}, scale {scale}");
    }

    #[test]
    fn spectrally_negative_stability_identity() {
        let mut rng = RngStream::new(5, 0);
        let alpha: f64 = 1.5;
        let k = 2f64.powf(1.0 / alpha);
        let sums = draws(100_000, || {
            let a = sample_spectrally_negative_stable(alpha, &mut rng).unwrap();
            let b = sample_spectrally_negative_stable(alpha, &mut rng).unwrap();
            (a + b) / k
        });
        let single = draws(100_000, || sample_spectrally_negative_stable(alpha, &mut rng).unwrap());
        assert!(ks2(&sums, &single) < 0.01);
    }

    #[test]
    fn spectrally_negative_matches_characteristic_function() {
        let mut rng = RngStream::new(6, 0);
        let alpha = 1.5;
        let m = 1_000_000;
        let xs = draws(m, || sample_spectrally_negative_stable(alpha, &mut rng).unwrap());
        let positive = xs.iter().filter(|&&x| x > 0.0).count() as f64 / m as f64;
        // no positive jumps: the positivity parameter is 1/α
        assert!((positive - 1.0 / alpha).abs() < 0.005, "P(S>0) = {positive}");
        for &u in &[0.5, 1.0, 2.0] {
            let re = xs.iter().map(|x| (u * x).cos()).sum::<f64>() / m as f64;
            let im = xs.iter().map(|x| (u * x).sin()).sum::<f64>() / m as f64;
            let (cre, cim) = spectrally_negative_cf(alpha, u);
            assert!((re - cre).abs() < 0.01, "u={u}: re {re} vs {cre}");
            assert!((im - cim).abs() < 0.01, "u={u}: im {im} vs {cim}");
        }
    }

    #[test]
    fn positive_stable_stability_identity() {
        let mut rng = RngStream::new(7, 0);
        let alpha: f64 = 0.5;
        let k = 3f64.powf(-1.0 / alpha);
        let sums = draws(100_000, || {
            k * (0..3)
                .map(|_| sample_positive_stable(alpha, &mut rng).unwrap())
                .sum::<f64>()
        });
        let single = draws(100_000, || sample_positive_stable(alpha, &mut rng).unwrap());
        assert!(ks2(&sums, &single) < 0.01);
    }

    #[test]
    fn inverse_marginal_self_similarity() {
        let mut rng = RngStream::new(8, 0);
        let alpha: f64 = 0.5;
        let at_four = draws(100_000, || sample_inverse_subordinator_marginal(alpha, 4.0, &mut rng).unwrap());
        let scaled = draws(100_000, || {
            4f64.powf(alpha) * sample_inverse_subordinator_marginal(alpha, 1.0, &mut rng).unwrap()
        });
        assert!(ks2(&at_four, &scaled) < 0.01);
    }

    #[test]
    fn inverse_marginal_agrees_with_path_sampler() {
        let mut rng = RngStream::new(9, 0);
        let alpha = 0.5;
        let m = 10_000;
        let exact = draws(m, || sample_inverse_subordinator_marginal(alpha, 1.0, &mut rng).unwrap());
        let path = draws(m, || {
            sample_inverse_subordinator_path(alpha, &[1.0], 1e-4, &mut rng).unwrap()[0]
        });
        let d = ks2(&exact, &path);
        assert!(d < 0.02, "ks {d}");
        // E W^←(1) = 1/(Γ(1-α)Γ(1+α)); the path estimate is the oracle here.
        let mean_path = path.iter().sum::<f64>() / m as f64;
        let sd = (path.iter().map(|x| (x - mean_path).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt();
        let formula = 1.0 / (gamma(0.5) * gamma(1.5));
        assert!((mean_path - formula).abs() < 3.0 * sd / (m as f64).sqrt(), "{mean_path} vs {formula}");
    }

    #[test]
    fn inverse_path_is_monotone_and_starts_at_zero() {
        let mut rng = RngStream::new(10, 0);
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
        for _ in 0..200 {
            let path = sample_inverse_subordinator_path(0.6, &grid, 1e-3, &mut rng).unwrap();
            assert_eq!(path[0], 0.0);
            assert!(path.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn left_limit_never_exceeds_value() {
        let mut rng = RngStream::new(11, 0);
        for _ in 0..500 {
            let q = [
                PassageQuery { level: 0.5, left_limit: false },
                PassageQuery { level: 0.5, left_limit: true },
            ];
            let v = subordinator_passages(0.5, &q, 1e-3, &mut rng).unwrap();
            assert!(v[1] <= v[0]);
        }
    }

    #[test]
    fn brownian_moments() {
        let mut rng = RngStream::new(12, 0);
        let m = 100_000;
        let paths: Vec<Vec<f64>> = (0..m)
            .map(|_| sample_brownian_marginals(&[0.0, 0.25, 0.5, 1.0], &mut rng).unwrap())
            .collect();
        assert!(paths.iter().all(|p| p[0] == 0.0));
        let mean = |f: &dyn Fn(&Vec<f64>) -> f64| paths.iter().map(f).sum::<f64>() / m as f64;
        let var1 = mean(&|p| p[3] * p[3]) - mean(&|p| p[3]).powi(2);
        assert!((var1 - 1.0).abs() < 0.02, "var {var1}");
        let cov = mean(&|p| p[1] * p[3]) - mean(&|p| p[1]) * mean(&|p| p[3]);
        assert!((cov - 0.25).abs() < 0.02, "cov {cov}");
        // bridge B(t) - tB(1) at t = 1/2: Var = t - 2t·t + t² = t(1-t)
        let bridge: Vec<f64> = paths.iter().map(|p| p[2] - 0.5 * p[3]).collect();
        let bm = bridge.iter().sum::<f64>() / m as f64;
        let bv = bridge.iter().map(|x| (x - bm).powi(2)).sum::<f64>() / (m - 1) as f64;
        assert!((bv - 0.25).abs() < 0.01, "bridge var {bv}");
    }
}
