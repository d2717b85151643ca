use rand::Rng;
use serde::{Deserialize, Serialize};

use super::result::{OccupancyResult, RegimeTally};
use super::KarlinProbabilities;
use crate::error::{param_err, Result, SieveError};
use crate::sampling::{sample_binomial_tracked, Stick, StickLaw};

/// `2^-80`
pub const DEFAULT_MIN_MASS: f64 = 8.271_806_125_530_277e-25;

/// Realized stick-breaking partition of `(0,1]`.
///
/// Box `k` (1-based) is `(V_k, V_{k-1}]` with `V_k = W_1⋯W_k`, so
/// `p*_k = V_{k-1}(1 - W_k)`. Cut points are kept both linearly and as
/// `S_k = -log V_k`, the latter being exact when `V_k` underflows.
#[derive(Clone, Debug, PartialEq)]
pub struct SieveEnvironment {
    law: StickLaw,
    sticks: Vec<Stick>,
    cut: Vec<f64>,
    log_cut: Vec<f64>,
}

/// Serialized form of an environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentRecord {
    pub law: StickLaw,
    /// `W_k`
    pub sticks: Vec<f64>,
    /// `1 - W_k`
    pub one_minus_w: Vec<f64>,
    /// `|log W_k|`
    pub xi: Vec<f64>,
    /// `|log(1 - W_k)|`
    pub eta: Vec<f64>,
    /// `V_k` for `k ≥ 1`
    pub cutpoints: Vec<f64>,
}

impl SieveEnvironment {
    /// Environment with no sticks yet.
    pub fn empty(law: StickLaw) -> Result<Self> {
        law.validate()?;
        Ok(SieveEnvironment {
            law,
            sticks: Vec::new(),
            cut: vec![1.0],
            log_cut: vec![0.0],
        })
    }

    /// Environment from already realized sticks.
    pub fn from_sticks(law: StickLaw, sticks: Vec<Stick>) -> Result<Self> {
        let mut env = SieveEnvironment::empty(law)?;
        for s in sticks {
            if !(s.xi > 0.0 && s.eta > 0.0 && s.one_minus_w > 0.0) {
                return param_err("stick outside (0,1)");
            }
            env.push(s);
        }
        Ok(env)
    }

    fn push(&mut self, s: Stick) {
        let v = *self.cut.last().unwrap() * s.w;
        let lv = *self.log_cut.last().unwrap() + s.xi;
        self.sticks.push(s);
        self.cut.push(v);
        self.log_cut.push(lv);
    }

    pub fn law(&self) -> &StickLaw {
        &self.law
    }

    /// Number of realized sticks.
    pub fn len(&self) -> usize {
        self.sticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sticks.is_empty()
    }

    pub fn sticks(&self) -> &[Stick] {
        &self.sticks
    }

    /// `V_k`, `k = 0..=len`.
    pub fn cutpoint(&self, k: usize) -> f64 {
        self.cut[k]
    }

    /// `-log V_k = ξ_1 + ... + ξ_k`, `k = 0..=len`.
    pub fn log_cutpoint(&self, k: usize) -> f64 {
        self.log_cut[k]
    }

    /// Mass not yet split into boxes, `V_K`.
    pub fn unresolved_mass(&self) -> f64 {
        *self.cut.last().unwrap()
    }

    /// `p*_k`, 1-based.
    pub fn box_prob(&self, k: usize) -> f64 {
        self.cut[k - 1] * self.sticks[k - 1].one_minus_w
    }

    /// `-log p*_k = S_{k-1} + η_k`, 1-based.
    pub fn neg_log_box_prob(&self, k: usize) -> f64 {
        self.log_cut[k - 1] + self.sticks[k - 1].eta
    }

    /// `p*_1, ..., p*_K` for the realized sticks.
    pub fn box_probs(&self) -> Vec<f64> {
        (1..=self.len()).map(|k| self.box_prob(k)).collect()
    }

    /// Draw one more stick.
    pub fn extend<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let s = self.law.draw(rng);
        self.push(s);
    }

    /// Draw sticks until `V_K < min_mass`.
    pub fn resolve<R: Rng + ?Sized>(&mut self, min_mass: f64, rng: &mut R) {
        // the log test also terminates once V_K has underflowed
        let depth = -min_mass.ln();
        while !(self.unresolved_mass() < min_mass || *self.log_cut.last().unwrap() > depth + 1.0) {
            self.extend(rng);
        }
    }

    /// Draw sticks until `S_K > depth`, i.e. `V_K < e^{-depth}`.
    pub fn resolve_log_depth<R: Rng + ?Sized>(&mut self, depth: f64, rng: &mut R) {
        while *self.log_cut.last().unwrap() <= depth {
            self.extend(rng);
        }
    }

    pub fn to_record(&self) -> EnvironmentRecord {
        EnvironmentRecord {
            law: self.law.clone(),
            sticks: self.sticks.iter().map(|s| s.w).collect(),
            one_minus_w: self.sticks.iter().map(|s| s.one_minus_w).collect(),
            xi: self.sticks.iter().map(|s| s.xi).collect(),
            eta: self.sticks.iter().map(|s| s.eta).collect(),
            cutpoints: self.cut[1..].to_vec(),
        }
    }

    pub fn from_record(rec: &EnvironmentRecord) -> Result<Self> {
        let k = rec.sticks.len();
        if rec.one_minus_w.len() != k || rec.xi.len() != k || rec.eta.len() != k {
            return Err(SieveError::Configuration(
                "environment record fields differ in length".into(),
            ));
        }
        let sticks = (0..k)
            .map(|i| Stick {
                w: rec.sticks[i],
                one_minus_w: rec.one_minus_w[i],
                xi: rec.xi[i],
                eta: rec.eta[i],
            })
            .collect();
        let env = SieveEnvironment::from_sticks(rec.law.clone(), sticks)?;
        if !rec.cutpoints.is_empty() && rec.cutpoints.as_slice() != &env.cut[1..] {
            return Err(SieveError::Configuration(
                "cutpoints disagree with sticks".into(),
            ));
        }
        Ok(env)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_record())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        SieveEnvironment::from_record(&serde_json::from_str(text)?)
    }

    fn check_resolved(&self, floor: f64) -> Result<()> {
        if self.unresolved_mass() >= floor {
            return Err(SieveError::Range(format!(
                "environment resolves mass only down to {:e}, needed {floor:e}",
                self.unresolved_mass()
            )));
        }
        Ok(())
    }
}

impl KarlinProbabilities for SieveEnvironment {
    fn probs_at_least(&self, floor: f64) -> Result<Vec<f64>> {
        if !(floor > 0.0) {
            return param_err("probability floor must be positive");
        }
        self.check_resolved(floor)?;
        Ok(self.box_probs().into_iter().filter(|&p| p >= floor).collect())
    }

    fn mass_below(&self, ceiling: f64) -> Result<f64> {
        self.check_resolved(ceiling)?;
        let listed: f64 = self.box_probs().into_iter().filter(|&p| p < ceiling).sum();
        Ok(listed + self.unresolved_mass())
    }
}

/// Draw sticks from `law` until the unresolved mass `V_K` drops below `min_mass`.
pub fn build_environment<R: Rng + ?Sized>(
    law: &StickLaw,
    min_mass: f64,
    rng: &mut R,
) -> Result<SieveEnvironment> {
    if !(min_mass > 0.0 && min_mass < 1.0) {
        return param_err(format!("min_mass = {min_mass} outside (0,1)"));
    }
    let mut env = SieveEnvironment::empty(law.clone())?;
    env.resolve(min_mass, rng);
    Ok(env)
}

/// Occupancy counts of `n` uniform balls in the boxes of `env`.
///
/// Box `k` receives `Bin(remaining, 1 - W_k)`; new sticks are drawn from
/// `rng` if balls remain after the last realized box.
pub fn occupy_sieve<R: Rng + ?Sized>(
    env: &mut SieveEnvironment,
    n: u64,
    rng: &mut R,
) -> Result<OccupancyResult> {
    let mut counts = Vec::new();
    let mut regimes = RegimeTally::default();
    let mut remaining = n;
    let mut k = 0usize;
    while remaining > 0 {
        if k == env.len() {
            env.extend(rng);
        }
        let (z, regime) = sample_binomial_tracked(remaining, env.sticks[k].one_minus_w, rng)?;
        regimes.record(regime);
        if z > 0 {
            counts.push((k as u64 + 1, z));
        }
        remaining -= z;
        k += 1;
    }
    let mut occ = OccupancyResult::new(n, counts)?;
    occ.regimes = regimes;
    Ok(occ)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::stats::chi_square_homogeneity;
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    use std::collections::BTreeMap;

    #[test]
    fn degenerate_half_sticks_are_dyadic() {
        let mut rng = RngStream::new(5, 0);
        let env = build_environment(&StickLaw::degenerate(0.5).unwrap(), 1e-6, &mut rng).unwrap();
        for k in 1..=env.len() {
            assert_eq!(env.box_prob(k), 0.5f64.powi(k as i32));
        }
        assert!(env.unresolved_mass() < 1e-6);
        assert_eq!(env.len(), 20);
    }

    #[test]
    fn partial_sums_and_monotone_cuts() {
        let mut rng = RngStream::new(6, 0);
        for law in [StickLaw::beta(1.0).unwrap(), StickLaw::beta(7.0).unwrap(), StickLaw::exp_pareto(0.7).unwrap()] {
            let env = build_environment(&law, 1e-9, &mut rng).unwrap();
            let total: f64 = env.box_probs().iter().sum();
            assert!((total + env.unresolved_mass() - 1.0).abs() < 1e-12);
            assert!(1.0 - total < 1e-9);
            assert!(env.box_probs().iter().all(|&p| p > 0.0));
            for k in 1..=env.len() {
                assert!(env.cutpoint(k) < env.cutpoint(k - 1) || env.cutpoint(k) == 0.0);
            }
        }
        assert!(build_environment(&StickLaw::beta(1.0).unwrap(), 1.0, &mut rng).is_err());
    }

    #[test]
    fn expected_depth_beta_one() {
        // first passage of Σ|log W_i| over 9 ln 10, simulated directly
        let mut rng = RngStream::new(7, 0);
        let law = StickLaw::beta(1.0).unwrap();
        let reps = 10_000;
        let mut env_total = 0usize;
        let mut walk_total = 0usize;
        let level = 9.0 * 10f64.ln();
        for _ in 0..reps {
            env_total += build_environment(&law, 1e-9, &mut rng).unwrap().len();
            let (mut s, mut k) = (0.0, 0usize);
            while s <= level {
                s += -rng.random::<f64>().ln();
                k += 1;
            }
            walk_total += k;
        }
        let env_mean = env_total as f64 / reps as f64;
        let walk_mean = walk_total as f64 / reps as f64;
        assert!((env_mean / 20.72 - 1.0).abs() < 0.05, "{env_mean}");
        assert!((env_mean / walk_mean - 1.0).abs() < 0.05);
    }

    #[test]
    fn trivial_occupancies() {
        let mut rng = RngStream::new(8, 0);
        let mut env = build_environment(&StickLaw::beta(1.0).unwrap(), 1e-3, &mut rng).unwrap();
        assert!(occupy_sieve(&mut env, 0, &mut rng).unwrap().counts.is_empty());
        let occ = occupy_sieve(&mut env, 1, &mut rng).unwrap();
        assert_eq!(occ.counts.len(), 1);
        assert_eq!(occ.counts[0].1, 1);
    }

    #[test]
    fn single_ball_box_law() {
        let mut rng = RngStream::new(9, 0);
        let mut env = build_environment(&StickLaw::beta(0.6).unwrap(), 1e-12, &mut rng).unwrap();
        let reps = 200_000;
        let mut hits = BTreeMap::new();
        for _ in 0..reps {
            let occ = occupy_sieve(&mut env, 1, &mut rng).unwrap();
            *hits.entry(occ.counts[0].0).or_insert(0u64) += 1;
        }
        for k in 1..=3 {
            let p = env.box_prob(k);
            let se = (p * (1.0 - p) / reps as f64).sqrt();
            let freq = *hits.get(&(k as u64)).unwrap_or(&0) as f64 / reps as f64;
            assert!((freq - p).abs() < 4.0 * se + 1e-12, "box {k}: {freq} vs {p}");
        }
    }

    fn naive_placement(env: &SieveEnvironment, n: u64, rng: &mut RngStream) -> Vec<u64> {
        let mut counts = vec![0u64; env.len() + 1];
        for _ in 0..n {
            let u: f64 = 1.0 - rng.random::<f64>();
            // box k is (V_k, V_{k-1}]
            let k = (1..=env.len()).find(|&k| u > env.cutpoint(k)).unwrap_or(env.len() + 1);
            counts[k - 1] += 1;
        }
        counts
    }

    fn joint_key(counts: &[u64], m: usize) -> Vec<u64> {
        (0..m).map(|i| counts.get(i).copied().unwrap_or(0)).collect()
    }

    fn thinning_matches_naive(law: StickLaw, n: u64, m: usize, reps: usize, seed: u64) {
        let mut rng = RngStream::new(seed, 0);
        let mut env = build_environment(&law, 1e-12, &mut rng).unwrap();
        let mut fast = BTreeMap::new();
        let mut slow = BTreeMap::new();
        for _ in 0..reps {
            let occ = occupy_sieve(&mut env, n, &mut rng).unwrap();
            let dense: Vec<u64> = (1..=m as u64).map(|i| occ.count(i)).collect();
            *fast.entry(joint_key(&dense, m)).or_insert(0u64) += 1;
            let naive = naive_placement(&env, n, &mut rng);
            *slow.entry(joint_key(&naive, m)).or_insert(0u64) += 1;
        }
        let (stat, df) = chi_square_homogeneity(&fast, &slow, 5.0);
        let p = 1.0 - ChiSquared::new(df.max(1) as f64).unwrap().cdf(stat);
        assert!(p > 1e-3, "chi-square {stat} on {df} df, p = {p}");
    }

    #[test]
    fn thinning_vs_naive_half_sticks() {
        thinning_matches_naive(StickLaw::degenerate(0.5).unwrap(), 100, 2, 100_000, 10);
    }

    #[test]
    fn thinning_vs_naive_random_environment() {
        thinning_matches_naive(StickLaw::beta(1.0).unwrap(), 12, 5, 100_000, 11);
        thinning_matches_naive(StickLaw::exp_pareto(0.8).unwrap(), 30, 3, 100_000, 12);
    }

    #[test]
    fn thinning_vs_naive_marginals_large_n() {
        let mut rng = RngStream::new(15, 0);
        let mut env = build_environment(&StickLaw::beta(1.0).unwrap(), 1e-12, &mut rng).unwrap();
        let (n, reps) = (1000u64, 20_000);
        for k in 1..=5u64 {
            let mut fast = BTreeMap::new();
            let mut slow = BTreeMap::new();
            for _ in 0..reps {
                let occ = occupy_sieve(&mut env, n, &mut rng).unwrap();
                *fast.entry(occ.count(k)).or_insert(0u64) += 1;
                let naive = naive_placement(&env, n, &mut rng);
                *slow.entry(naive[k as usize - 1]).or_insert(0u64) += 1;
            }
            let (stat, df) = chi_square_homogeneity(&fast, &slow, 5.0);
            let p = 1.0 - ChiSquared::new(df.max(1) as f64).unwrap().cdf(stat);
            assert!(p > 1e-3, "box {k}: chi-square {stat} on {df} df, p = {p}");
        }
    }

    #[test]
    fn huge_n_conserved() {
        let mut rng = RngStream::new(12, 0);
        for law in [StickLaw::beta(1.0).unwrap(), StickLaw::exp_pareto(0.5).unwrap()] {
            let mut env = build_environment(&law, DEFAULT_MIN_MASS, &mut rng).unwrap();
            for &n in &[(1u64 << 62) - 1, 1 << 62, 4_000_000_000_000_000_000] {
                if n > 1 << 62 {
                    assert!(occupy_sieve(&mut env, n, &mut rng).is_err());
                    continue;
                }
                let occ = occupy_sieve(&mut env, n, &mut rng).unwrap();
                assert_eq!(occ.counts.iter().map(|c| c.1).sum::<u64>(), n);
            }
        }
    }

    #[test]
    fn json_roundtrip() {
        let mut rng = RngStream::new(13, 0);
        let env = build_environment(&StickLaw::beta(2.0).unwrap(), 1e-6, &mut rng).unwrap();
        let text = env.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v["sticks"].is_array() && v["cutpoints"].is_array());
        assert_eq!(SieveEnvironment::from_json(&text).unwrap(), env);
    }

    #[test]
    fn unresolved_queries_fail() {
        let mut rng = RngStream::new(14, 0);
        let env = build_environment(&StickLaw::beta(1.0).unwrap(), 1e-3, &mut rng).unwrap();
        assert!(env.probs_at_least(1e-6).is_err());
        assert!(env.probs_at_least(1e-2).is_ok());
    }
}
