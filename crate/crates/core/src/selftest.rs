//! Fast deterministic checks of the degenerate and boundary cases of every
//! module, run by `sieve selftest`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::ewens::{c_process, esf_probability, sample_cycles_crp, sample_cycles_feller, CycleCounts};
use crate::limits::{centering_prw, centering_u_v, normal_cdf, normalizer_c, sample_limit, LimitLaw};
use crate::limits::{NormalizerKind, SlowVariation};
use crate::occupancy::{
    approximation_bound_lhs_estimate, build_environment, expected_occupancy_oracle, k_process,
    occupy_sieve, reversed_rho_increment, rho, x0, DeterministicScheme, OccupancyMoment,
    OccupancyResult, SieveEnvironment,
};
use crate::prw::{max_window_count, EtaLaw, PrwPath, StepLaw, XiLaw};
use crate::rng::RngStream;
use crate::sampling::{
    sample_binomial, sample_brownian_marginals, sample_inverse_subordinator_marginal,
    sample_inverse_subordinator_path, sample_spectrally_negative_stable, sample_standard_positive_stable,
    sample_stick, StickLaw,
};
use crate::stats::{correlation, ks_one_sample, ks_two_sample, variance};

const SEED: u64 = 0x5e1f_7e57;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelfCheck {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub error: Option<String>,
}

type Case = (&'static str, &'static str, fn(&mut RngStream) -> Result<bool>);

fn deterministic_walk() -> Result<StepLaw> {
    StepLaw::independent(XiLaw::Constant { value: 1.0 }, EtaLaw::Constant { value: 0.5 })
}

const CASES: &[Case] = &[
    ("sampling", "Beta(1,1) stick has mean 1/2", |rng| {
        let law = StickLaw::beta(1.0)?;
        let m = (0..1_000_000).map(|_| sample_stick(&law, rng)).sum::<Result<f64>>()? / 1e6;
        Ok((m - 0.5).abs() < 0.002)
    }),
    ("sampling", "Bin(0, 0.3) = 0", |rng| Ok(sample_binomial(0, 0.3, rng)? == 0)),
    ("sampling", "Bin(1e6, 1) = 1e6", |rng| Ok(sample_binomial(1_000_000, 1.0, rng)? == 1_000_000)),
    ("sampling", "E exp(-D) = 1/e for the standard positive stable", |rng| {
        let m = (0..1_000_000)
            .map(|_| sample_standard_positive_stable(0.5, rng).map(|d| (-d).exp()))
            .sum::<Result<f64>>()?
            / 1e6;
        Ok((m - (-1f64).exp()).abs() < 0.002)
    }),
    ("sampling", "stability (X1 + X2)/2^(1/a) =d X", |rng| {
        let a = 1.5;
        let mut lhs = Vec::with_capacity(100_000);
        let mut rhs = Vec::with_capacity(100_000);
        for _ in 0..100_000 {
            let s = sample_spectrally_negative_stable(a, rng)? + sample_spectrally_negative_stable(a, rng)?;
            lhs.push(s / 2f64.powf(1.0 / a));
            rhs.push(sample_spectrally_negative_stable(a, rng)?);
        }
        Ok(ks_two_sample(&lhs, &rhs)? < 0.01)
    }),
    ("sampling", "self-similarity W^<-(4) =d 4^a W^<-(1)", |rng| {
        let mut lhs = Vec::with_capacity(100_000);
        let mut rhs = Vec::with_capacity(100_000);
        for _ in 0..100_000 {
            lhs.push(sample_inverse_subordinator_marginal(0.5, 4.0, rng)?);
            rhs.push(2.0 * sample_inverse_subordinator_marginal(0.5, 1.0, rng)?);
        }
        Ok(ks_two_sample(&lhs, &rhs)? < 0.01)
    }),
    ("sampling", "inverse subordinator path is nondecreasing, 0 at t=0", |rng| {
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 10.0).collect();
        for _ in 0..200 {
            let p = sample_inverse_subordinator_path(0.5, &grid, 1e-3, rng)?;
            if p[0] != 0.0 || p.windows(2).any(|w| w[1] < w[0]) {
                return Ok(false);
            }
        }
        Ok(true)
    }),
    ("sampling", "Var B(1) = 1 and Cov(B(1/4), B(1)) = 1/4", |rng| {
        let mut a = Vec::with_capacity(100_000);
        let mut b = Vec::with_capacity(100_000);
        for _ in 0..100_000 {
            let v = sample_brownian_marginals(&[0.25, 1.0], rng)?;
            a.push(v[0]);
            b.push(v[1]);
        }
        let cov = correlation(&a, &b) * (variance(&a) * variance(&b)).sqrt();
        Ok((variance(&b) - 1.0).abs() < 0.02 && (cov - 0.25).abs() < 0.02)
    }),
    ("occupancy", "W = 1/2 gives p_k = 2^-k", |rng| {
        let env = build_environment(&StickLaw::degenerate(0.5)?, 1e-12, rng)?;
        Ok(env.box_probs().iter().enumerate().all(|(k, &p)| p == 0.5f64.powi(k as i32 + 1)))
    }),
    ("occupancy", "resolved environment leaves less than min_mass", |rng| {
        let env = build_environment(&StickLaw::beta(1.0)?, 1e-9, rng)?;
        Ok(env.unresolved_mass() < 1e-9)
    }),
    ("occupancy", "n = 0 gives empty counts", |rng| {
        let mut env = SieveEnvironment::empty(StickLaw::beta(1.0)?)?;
        Ok(occupy_sieve(&mut env, 0, rng)?.counts.is_empty())
    }),
    ("occupancy", "n = 1 gives one box with one ball", |rng| {
        let mut env = SieveEnvironment::empty(StickLaw::beta(2.0)?)?;
        let occ = occupy_sieve(&mut env, 1, rng)?;
        Ok(occ.counts.len() == 1 && occ.counts[0].1 == 1)
    }),
    ("occupancy", "K_n(1) is the number of occupied boxes", |rng| {
        let mut env = SieveEnvironment::empty(StickLaw::beta(1.0)?)?;
        let occ = occupy_sieve(&mut env, 10_000, rng)?;
        Ok(k_process(&occ, &[1.0])?.values[0] == occ.occupied())
    }),
    ("occupancy", "all counts 1 give constant K_n(t)", |_| {
        let occ = OccupancyResult::new(5, (1..=5).map(|k| (k, 1)).collect())?;
        let k = k_process(&occ, &[0.0, 0.3, 0.7, 1.0])?;
        Ok(k.values.iter().all(|&v| v == 5))
    }),
    ("occupancy", "geometric rho(8) = 3 and rho(x) = 0 below 1/p_1", |_| {
        let g = DeterministicScheme::geometric(0.5)?;
        Ok(rho(&g, 8.0)? == 3 && rho(&g, 1.9)? == 0)
    }),
    ("occupancy", "reversed rho increment is 0 at t = 0", |_| {
        let g = DeterministicScheme::geometric(0.5)?;
        Ok(reversed_rho_increment(&g, 1000, &[0.0])?[0] == 0)
    }),
    ("occupancy", "x0 solves x - x^(3/4) = 1", |_| {
        let x = x0();
        Ok((x - x.powf(0.75) - 1.0).abs() < 1e-10)
    }),
    ("occupancy", "single box scheme: LHS estimate in [0, 1]", |rng| {
        let s = DeterministicScheme::explicit(vec![1.0])?;
        let (m, se) = approximation_bound_lhs_estimate(&s, 100, 100, &[0.5], rng)?;
        Ok((0.0..=1.0).contains(&m) && se.is_finite() && se >= 0.0)
    }),
    ("occupancy", "E K_{n,n} = sum p^n and E K_1 = 1", |_| {
        let g = DeterministicScheme::geometric(0.5)?;
        let exact: f64 = (1..200).map(|k| 0.5f64.powi(4 * k)).sum();
        let e = expected_occupancy_oracle(&g, 4, OccupancyMoment::Exactly(4))?;
        let e1 = expected_occupancy_oracle(&g, 1, OccupancyMoment::Occupied)?;
        Ok((e - exact).abs() < 1e-14 && (e1 - 1.0).abs() < 1e-14)
    }),
    ("prw", "xi = 1, eta = 1/2: T_k = k - 1/2 and N(2) = 2", |rng| {
        let path = PrwPath::simulate(&deterministic_walk()?, 10.0, rng)?;
        let t_ok = path.t_values().iter().enumerate().all(|(k, &t)| t == k as f64 + 0.5);
        Ok(t_ok && path.visits(2.0)? == 2 && path.visits(0.0)? == 0)
    }),
    ("prw", "xi = 1: renewals nu(t) = floor(t) + 1", |rng| {
        let path = PrwPath::simulate(&deterministic_walk()?, 10.0, rng)?;
        Ok([0.0, 0.5, 1.0, 3.7].iter().all(|&t| path.renewals(t).ok() == Some(t.floor() as u64 + 1)))
    }),
    ("prw", "deterministic walk windows hold at most one point", |rng| {
        let path = PrwPath::simulate(&deterministic_walk()?, 110.0, rng)?;
        Ok(max_window_count(&path, 100.0, 0.1)? <= 1)
    }),
    ("ewens", "n = 1 gives one fixed point", |rng| {
        let a = sample_cycles_crp(1, 0.7, rng)?;
        let b = sample_cycles_feller(1, 0.7, rng)?;
        Ok(a.count(1) == 1 && b.count(1) == 1 && a.cycles() == 1)
    }),
    ("ewens", "theta = 1e6, n = 10: nearly always all singletons", |rng| {
        let mut hits = 0;
        for _ in 0..10_000 {
            if sample_cycles_crp(10, 1e6, rng)?.count(1) == 10 {
                hits += 1;
            }
        }
        Ok(hits as f64 / 1e4 > 0.99)
    }),
    ("ewens", "ESF(n=1) = 1 and sums to 1 at n = 6", |_| {
        let one = CycleCounts::from_lengths(1, 1.3, [1]);
        let total: f64 = crate::ewens::cycle_types(6)
            .into_iter()
            .map(|m| esf_probability(&CycleCounts { n: 6, theta: 2.0, counts: m }))
            .sum::<Result<f64>>()?;
        Ok((esf_probability(&one)? - 1.0).abs() < 1e-15 && (total - 1.0).abs() < 1e-12)
    }),
    ("ewens", "C_n(1) counts cycles; identity gives C_n(t) = n", |rng| {
        let c = sample_cycles_crp(50, 1.0, rng)?;
        let id = CycleCounts::from_lengths(7, 1.0, [1; 7]);
        Ok(c_process(&c, &[1.0])?[0] == c.cycles() && c_process(&id, &[0.0, 0.5, 1.0])? == vec![7, 7, 7])
    }),
    ("limits", "B(0) = 0 and ratio draws lie in [0, 1]", |rng| {
        let zero = sample_limit(&LimitLaw::BrownianMarginal { t: 0.0 }, rng)? == 0.0;
        let law = LimitLaw::InverseSubordinatorRatio { alpha: 0.5, t: 0.3, mesh: 1e-3 };
        for _ in 0..200 {
            if !(0.0..=1.0).contains(&sample_limit(&law, rng)?) {
                return Ok(false);
            }
        }
        Ok(zero)
    }),
    ("limits", "Phi(0) = 1/2 and Phi(x) + Phi(-x) = 1", |_| {
        let sym = (0..100).all(|i| {
            let x = i as f64 * 0.1;
            (normal_cdf(x) + normal_cdf(-x) - 1.0).abs() < 1e-12
        });
        Ok(normal_cdf(0.0) == 0.5 && sym)
    }),
    ("limits", "c(8) = 4 for a = 1.5 and the defining relation", |_| {
        let k = NormalizerKind::Stable { alpha: 1.5, ell: SlowVariation::Constant { a: 1.0 } };
        let log = NormalizerKind::FiniteVarianceBoundary { ell: SlowVariation::Log { a: 2.0 } };
        let mut ok = (normalizer_c(&k, 8.0)? - 4.0).abs() < 1e-12;
        for x in [10.0, 1e3, 1e6] {
            let c = normalizer_c(&log, x)?;
            ok &= (c.powi(-2) * x * 2.0 * c.ln() - 1.0).abs() < 1e-9;
        }
        Ok(ok)
    }),
    ("limits", "u_n(0) = v_n(0) = 0 and u + v = t log n / mu", |rng| {
        let law = StickLaw::beta(1.0)?;
        let (u0, v0) = centering_u_v(&law, 1e6, 0.0)?;
        let mut ok = u0 == 0.0 && v0 == 0.0;
        for _ in 0..20 {
            let theta = 0.2 + 3.0 * rng.random::<f64>();
            let n = 10f64.powf(1.0 + 15.0 * rng.random::<f64>());
            let t = rng.random::<f64>();
            let law = StickLaw::beta(theta)?;
            let (u, v) = centering_u_v(&law, n, t)?;
            ok &= (u + v - t * n.ln() * theta).abs() < 1e-10 * (1.0 + n.ln() * theta);
        }
        Ok(ok)
    }),
    ("limits", "walk centering vanishes at t = 0 and below a constant eta", |_| {
        let exp = EtaLaw::Exponential { rate: 1.0 };
        let c = EtaLaw::Constant { value: 2.0 };
        Ok(centering_prw(&exp, 100.0, 0.0, 1.0)? == 0.0 && centering_prw(&c, 1.0, 1.5, 1.0)? == 0.0)
    }),
    ("stats", "KS of quantile ranks is 1/(2m)", |_| {
        let m = 200;
        let xs: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) / m as f64).collect();
        Ok((ks_one_sample(&xs, |x| x.clamp(0.0, 1.0))? - 0.5 / m as f64).abs() < 1e-12)
    }),
    ("stats", "KS is invariant under a monotone transform", |rng| {
        let xs: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        let a = ks_one_sample(&xs, |x| x.clamp(0.0, 1.0))?;
        let b = ks_one_sample(&ys, |y| y.ln().clamp(0.0, 1.0))?;
        Ok((a - b).abs() < 1e-12)
    }),
    ("stats", "two-sample KS of identical and disjoint samples", |_| {
        let a = [0.3, 0.1, 0.7];
        Ok(ks_two_sample(&a, &a)? == 0.0 && ks_two_sample(&[0.0], &[1.0])? == 1.0)
    }),
];

/// Run every case on its own stream. Errors count as failures.
pub fn run_selftest() -> Vec<SelfCheck> {
    CASES
        .iter()
        .enumerate()
        .map(|(i, &(module, name, f))| {
            let mut rng = RngStream::replicate(SEED, 0, i as u32);
            let (passed, error) = match f(&mut rng) {
                Ok(p) => (p, None),
                Err(e) => (false, Some(e.to_string())),
            };
            SelfCheck {
                module,
                name,
                passed,
                error,
            }
        })
        .collect()
}

/// Number of cases per module.
pub fn case_counts() -> BTreeMap<&'static str, usize> {
    let mut out = BTreeMap::new();
    for (module, _, _) in CASES {
        *out.entry(*module).or_insert(0) += 1;
    }
    out
}
