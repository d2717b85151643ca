use std::f64::consts::E;
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::result::OccupancyResult;
use super::scheme::{occupy_scheme, DeterministicScheme};
use super::{rho, KarlinProbabilities};
use crate::error::{param_err, Result, SieveError};
use crate::special::ln_choose;
use crate::steps::floor_pow;

/// Root `x₀ > 1` of `x - x^{3/4} = 1`.
pub fn x0() -> f64 {
    static ROOT: OnceLock<f64> = OnceLock::new();
    *ROOT.get_or_init(|| {
        let f = |x: f64| x - x.powf(0.75) - 1.0;
        let (mut lo, mut hi) = (1.0f64, 4.0f64);
        while hi - lo > 1e-14 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    })
}

/// The four terms of the uniform approximation bound and their sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundTerms {
    /// `6(ρ(n) - ρ(n / (x₀ log² n)))`
    pub head: f64,
    /// `3ρ(n) / log n`
    pub ratio: f64,
    /// `∫_1^∞ t^{-2}(ρ(nt) - ρ(n)) dt = n Σ_{p_k < 1/n} p_k`
    pub integral: f64,
    /// `2 sup_t (ρ(e n^{1-t}) - ρ(e^{-1} n^{1-t}))`
    pub sup: f64,
    pub total: f64,
}

/// `sup_{t∈[0,1]} (ρ(e n^{1-t}) - ρ(e^{-1} n^{1-t}))`.
///
/// With `s = (1-t) log n` and `L_k = -log p_k` the difference counts
/// `L_k ∈ (s-1, s+1]`, which only increases when `s` crosses some `L_k - 1`,
/// so the sup is a max over `s ∈ {0, log n} ∪ {L_k - 1}`.
fn window_sup<P: KarlinProbabilities + ?Sized>(probs: &P, n: u64) -> Result<u64> {
    let ln_n = (n as f64).ln();
    let mut ls: Vec<f64> = probs
        .probs_at_least(1.0 / (E * n as f64))?
        .iter()
        .map(|p| -p.ln())
        .collect();
    ls.sort_by(f64::total_cmp);
    let count = |lo_excl: f64, hi_incl: f64| {
        (ls.partition_point(|&l| l <= hi_incl) - ls.partition_point(|&l| l <= lo_excl)) as u64
    };
    let mut best = count(-1.0, 1.0).max(count(ln_n - 1.0, ln_n + 1.0));
    for &l in &ls {
        let s = l - 1.0;
        if s > 0.0 && s < ln_n {
            best = best.max(count(l - 2.0, l));
        }
    }
    Ok(best)
}

/// Right-hand side `ε_n` of the uniform approximation bound for `K_n(t)`.
pub fn approximation_bound_rhs<P: KarlinProbabilities + ?Sized>(
    probs: &P,
    n: u64,
) -> Result<BoundTerms> {
    if n < 3 {
        return param_err(format!("approximation bound needs n >= 3, got {n}"));
    }
    let nf = n as f64;
    let ln_n = nf.ln();
    let rho_n = rho(probs, nf)? as f64;
    let inner = rho(probs, nf / (x0() * ln_n * ln_n))? as f64;
    let head = 6.0 * (rho_n - inner);
    let ratio = 3.0 * rho_n / ln_n;
    // ρ(nt) - ρ(n) counts 1/(nt) ≤ p_k < 1/n; integrating t^{-2} over t ≥ 1/(n p_k) gives n p_k
    let integral = nf * probs.mass_below(1.0 / nf)?;
    let sup = 2.0 * window_sup(probs, n)? as f64;
    Ok(BoundTerms {
        head,
        ratio,
        integral,
        sup,
        total: head + ratio + integral + sup,
    })
}

/// `sup_t |K_n(t) - #{k : 1/n < p_k ≤ n^{t-1}}|` for one occupancy vector.
///
/// `above` lists the box probabilities exceeding `1/n`. In the variable
/// `y = n^t ∈ [1, n]` both step functions are right-continuous,
/// `K(y) = #{i : Z_i ≤ y}` and `R(y) = #{k : n p_k ≤ y}`, so the sup is attained at
/// `y = 1` or at a jump. Grid points are evaluated in addition.
pub fn sup_deviation(occ: &OccupancyResult, above: &[f64], grid: &[f64]) -> f64 {
    let n = occ.n;
    let nf = n as f64;
    let z: Vec<f64> = occ.sorted_counts().iter().map(|&c| c as f64).collect();
    let mut np: Vec<f64> = above.iter().map(|&p| nf * p).filter(|&y| y > 1.0).collect();
    np.sort_by(f64::total_cmp);
    let k_at = |y: f64| z.partition_point(|&c| c <= y) as f64;
    let r_at = |y: f64| np.partition_point(|&v| v <= y) as f64;
    let mut best = (k_at(1.0) - r_at(1.0)).abs();
    for &y in z.iter().chain(np.iter()) {
        best = best.max((k_at(y) - r_at(y)).abs());
    }
    for &t in grid {
        let k = k_at(floor_pow(n, t) as f64);
        let upper = nf.powf(t - 1.0);
        let r = above.iter().filter(|&&p| p > 1.0 / nf && p <= upper).count() as f64;
        best = best.max((k - r).abs());
    }
    best
}

/// Monte Carlo estimate `(mean, stderr)` of
/// `E sup_t |K_n(t) - (ρ(n) - ρ(n^{(1-t)-}))|`.
pub fn approximation_bound_lhs_estimate<R: Rng + ?Sized>(
    scheme: &DeterministicScheme,
    n: u64,
    replicates: usize,
    grid: &[f64],
    rng: &mut R,
) -> Result<(f64, f64)> {
    if replicates < 100 {
        return param_err("at least 100 replicates are required");
    }
    if n < 2 {
        return param_err("n must be at least 2");
    }
    let above: Vec<f64> = scheme
        .probs_at_least(1.0 / n as f64)?
        .into_iter()
        .filter(|&p| p > 1.0 / n as f64)
        .collect();
    let mut sups = Vec::with_capacity(replicates);
    for _ in 0..replicates {
        let occ = occupy_scheme(scheme, n, rng)?;
        sups.push(sup_deviation(&occ, &above, grid));
    }
    Ok((crate::stats::mean(&sups), crate::stats::std_error(&sups)))
}

/// Which occupancy expectation to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OccupancyMoment {
    /// `E K_n`, the number of occupied boxes.
    Occupied,
    /// `E K_{n,r}`, the number of boxes with exactly `r` balls.
    Exactly(u64),
}

/// Exact `E K_{n,r} = Σ_j C(n,r) p_j^r (1-p_j)^{n-r}` or `E K_n = Σ_j (1 - (1-p_j)^n)`.
pub fn expected_occupancy_oracle(
    scheme: &DeterministicScheme,
    n: u64,
    moment: OccupancyMoment,
) -> Result<f64> {
    scheme.validate()?;
    if n > 1_000_000 {
        return Err(SieveError::Range(format!(
            "exact occupancy expectations limited to n <= 1e6, got {n}"
        )));
    }
    if let OccupancyMoment::Exactly(0) = moment {
        return param_err("r must be at least 1");
    }
    if let OccupancyMoment::Exactly(r) = moment {
        if r > n {
            return Ok(0.0);
        }
    }
    let nf = n as f64;
    let term = |p: f64| -> f64 {
        let log_q = (-p).ln_1p();
        match moment {
            OccupancyMoment::Occupied => -(nf * log_q).exp_m1(),
            OccupancyMoment::Exactly(r) => {
                let log_t = ln_choose(n, r) + r as f64 * p.ln() + (n - r) as f64 * log_q;
                if p == 1.0 {
                    if r == n { 1.0 } else { 0.0 }
                } else {
                    log_t.exp()
                }
            }
        }
    };
    // terms decrease in j once n p_j is below the mode
    let mode = match moment {
        OccupancyMoment::Occupied => 0.0,
        OccupancyMoment::Exactly(r) => r as f64 / nf,
    };
    let mut acc = 0.0;
    let mut j = 1u64;
    loop {
        if let Some(len) = scheme.len() {
            if j as usize > len {
                break;
            }
        }
        let p = scheme.prob(j);
        let t = term(p);
        acc += t;
        if scheme.len().is_none() && p < mode.max(1.0 / nf) && t <= 1e-15 * acc {
            break;
        }
        j += 1;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::occupancy::occupy_scheme;
    use crate::quad::integrate_with_breaks;
    use crate::rng::RngStream;

    #[test]
    fn x0_solves_defining_equation() {
        let x = x0();
        assert!(x > 1.0);
        assert!((x - x.powf(0.75) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rhs_rejects_small_n() {
        let g = DeterministicScheme::geometric(0.5).unwrap();
        assert!(approximation_bound_rhs(&g, 2).is_err());
        assert!(approximation_bound_rhs(&g, 3).is_ok());
    }

    fn quadrature_integral(g: &DeterministicScheme, n: u64) -> f64 {
        // t = 1/u maps ∫_1^∞ t^{-2}(ρ(nt) - ρ(n)) dt to ∫_0^1 (ρ(n/u) - ρ(n)) du
        let nf = n as f64;
        let rho_n = rho(g, nf).unwrap() as f64;
        let breaks: Vec<f64> = g
            .probs_at_least(1e-18 / nf)
            .unwrap()
            .into_iter()
            .filter(|&p| p < 1.0 / nf)
            .map(|p| nf * p)
            .collect();
        let f = |u: f64| {
            if u < 1e-18 {
                return 0.0;
            }
            rho(g, nf / u).unwrap() as f64 - rho_n
        };
        integrate_with_breaks(f, 0.0, 1.0, &breaks, 1e-12)
    }

    #[test]
    fn integral_term_geometric_closed_form_and_quadrature() {
        let g = DeterministicScheme::geometric(0.5).unwrap();
        for &n in &[3u64, 10, 1000, 123_457, 1_000_000] {
            let terms = approximation_bound_rhs(&g, n).unwrap();
            let first = (1..).find(|&k| 0.5f64.powi(k) < 1.0 / n as f64).unwrap();
            let closed = n as f64 * 0.5f64.powi(first - 1);
            assert!((terms.integral - closed).abs() < 1e-12 * closed);
            let quad = quadrature_integral(&g, n);
            assert!((terms.integral - quad).abs() < 1e-6, "n={n}: {} vs {quad}", terms.integral);
        }
    }

    #[test]
    fn boundary_mass_counts_in_rho() {
        // p = 1/4 exactly equals 1/n at n = 4: it enters ρ(4), not the integral
        let s = DeterministicScheme::explicit(vec![0.5, 0.25, 0.125, 0.125]).unwrap();
        let terms = approximation_bound_rhs(&s, 4).unwrap();
        assert_eq!(rho(&s, 4.0).unwrap(), 2);
        assert!((terms.integral - 4.0 * 0.25).abs() < 1e-15);
    }

    fn brute_window_sup(g: &DeterministicScheme, n: u64) -> u64 {
        let nf = n as f64;
        (0..=10_000)
            .map(|i| {
                let t = i as f64 / 10_000.0;
                let y = nf.powf(1.0 - t);
                rho(g, E * y).unwrap() - rho(g, y / E).unwrap()
            })
            .max()
            .unwrap()
    }

    #[test]
    fn sup_term_matches_dense_grid() {
        for &q in &[0.5, 0.8, 0.95, 0.3] {
            let g = DeterministicScheme::geometric(q).unwrap();
            for &n in &[10u64, 1000, 1_000_000] {
                let exact = window_sup(&g, n).unwrap();
                assert_eq!(exact, brute_window_sup(&g, n), "q={q} n={n}");
            }
        }
    }

    #[test]
    fn single_box_lhs_at_most_one() {
        let s = DeterministicScheme::explicit(vec![1.0]).unwrap();
        let mut rng = RngStream::new(20, 0);
        let (m, se) = approximation_bound_lhs_estimate(&s, 1000, 100, &[0.0, 0.5, 1.0], &mut rng).unwrap();
        assert!(m <= 1.0 && se >= 0.0);
        assert!(approximation_bound_lhs_estimate(&s, 1000, 99, &[], &mut rng).is_err());
    }

    #[test]
    fn sup_deviation_matches_dense_grid() {
        let mut rng = RngStream::new(21, 0);
        let g = DeterministicScheme::geometric(0.5).unwrap();
        let n = 5000u64;
        let above: Vec<f64> = g.probs_at_least(1.0 / n as f64).unwrap().into_iter().filter(|&p| p > 1.0 / n as f64).collect();
        let dense: Vec<f64> = (0..=20_000).map(|i| i as f64 / 20_000.0).collect();
        for _ in 0..200 {
            let occ = occupy_scheme(&g, n, &mut rng).unwrap();
            let exact = sup_deviation(&occ, &above, &[]);
            let kp = crate::occupancy::k_process(&occ, &dense).unwrap();
            let rr = crate::occupancy::reversed_rho_increment(&g, n, &dense).unwrap();
            let grid_sup = kp
                .values
                .iter()
                .zip(&rr)
                .map(|(&k, &r)| (k as f64 - r as f64).abs())
                .fold(0.0, f64::max);
            assert!(grid_sup <= exact);
            assert_eq!(sup_deviation(&occ, &above, &dense), exact);
        }
    }

    #[test]
    fn lhs_stderr_shrinks() {
        let g = DeterministicScheme::geometric(0.5).unwrap();
        let mut rng = RngStream::new(22, 0);
        let (m1, s1) = approximation_bound_lhs_estimate(&g, 10_000, 400, &[], &mut rng).unwrap();
        let (m2, s2) = approximation_bound_lhs_estimate(&g, 10_000, 6400, &[], &mut rng).unwrap();
        assert!(m1.is_finite() && m1 >= 0.0 && m2 >= 0.0);
        let ratio = s1 / s2;
        assert!(ratio > 2.5 && ratio < 6.5, "{ratio}");
    }

    #[test]
    fn oracle_trivial_cases() {
        let g = DeterministicScheme::geometric(0.5).unwrap();
        assert!((expected_occupancy_oracle(&g, 1, OccupancyMoment::Occupied).unwrap() - 1.0).abs() < 1e-14);
        let direct: f64 = (1..200).map(|j| 0.5f64.powi(j).powi(30)).sum();
        let via = expected_occupancy_oracle(&g, 30, OccupancyMoment::Exactly(30)).unwrap();
        assert!((via - direct).abs() < 1e-12 * direct);
        assert!(expected_occupancy_oracle(&g, 2_000_000, OccupancyMoment::Occupied).is_err());
        // Σ_r E K_{n,r} = E K_n
        let n = 40;
        let sum: f64 = (1..=n).map(|r| expected_occupancy_oracle(&g, n, OccupancyMoment::Exactly(r)).unwrap()).sum();
        let kn = expected_occupancy_oracle(&g, n, OccupancyMoment::Occupied).unwrap();
        assert!((sum - kn).abs() < 1e-10);
        // Σ_r r E K_{n,r} = n
        let balls: f64 = (1..=n).map(|r| r as f64 * expected_occupancy_oracle(&g, n, OccupancyMoment::Exactly(r)).unwrap()).sum();
        assert!((balls - n as f64).abs() < 1e-9);
    }

    #[test]
    fn oracle_vs_monte_carlo() {
        let g = DeterministicScheme::geometric(0.5).unwrap();
        let mut rng = RngStream::new(23, 0);
        let reps = 100_000;
        let ks: Vec<f64> = (0..reps)
            .map(|_| occupy_scheme(&g, 100, &mut rng).unwrap().occupied() as f64)
            .collect();
        let exact = expected_occupancy_oracle(&g, 100, OccupancyMoment::Occupied).unwrap();
        let (m, se) = (crate::stats::mean(&ks), crate::stats::std_error(&ks));
        assert!((m - exact).abs() < 3.0 * se, "{m} ± {se} vs {exact}");
    }

    #[test]
    fn rhs_dominates_lhs_geometric_million() {
        let g = DeterministicScheme::geometric(0.5).unwrap();
        let mut rng = RngStream::new(24, 0);
        let rhs = approximation_bound_rhs(&g, 1_000_000).unwrap();
        let (m, _) = approximation_bound_lhs_estimate(&g, 1_000_000, 500, &[], &mut rng).unwrap();
        assert!(m <= rhs.total, "{m} vs {:?}", rhs);
    }
}
