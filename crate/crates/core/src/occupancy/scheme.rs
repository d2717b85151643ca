use rand::Rng;
use serde::{Deserialize, Serialize};

use super::result::{OccupancyResult, RegimeTally};
use super::KarlinProbabilities;
use crate::error::{param_err, Result};
use crate::sampling::sample_binomial_tracked;

/// Karlin scheme with fixed, nonincreasing box probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeterministicScheme {
    /// `p_k = (1 - q) q^{k-1}`
    Geometric { q: f64 },
    /// Finite list of box probabilities.
    Explicit { probs: Vec<f64> },
}

impl DeterministicScheme {
    pub fn geometric(q: f64) -> Result<Self> {
        let s = DeterministicScheme::Geometric { q };
        s.validate()?;
        Ok(s)
    }

    pub fn explicit(probs: Vec<f64>) -> Result<Self> {
        let s = DeterministicScheme::Explicit { probs };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DeterministicScheme::Geometric { q } => {
                if !(*q > 0.0 && *q < 1.0) {
                    return param_err(format!("geometric ratio q = {q} outside (0,1)"));
                }
            }
            DeterministicScheme::Explicit { probs } => {
                if probs.is_empty() {
                    return param_err("explicit scheme needs at least one box");
                }
                if probs.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
                    return param_err("box probabilities must be positive");
                }
                if probs.windows(2).any(|w| w[1] > w[0]) {
                    return param_err("box probabilities must be nonincreasing");
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return param_err(format!("box probabilities sum to {total}"));
                }
            }
        }
        Ok(())
    }

    /// `p_k`, 1-based.
    pub fn prob(&self, k: u64) -> f64 {
        match self {
            DeterministicScheme::Geometric { q } => (1.0 - q) * q.powf((k - 1) as f64),
            DeterministicScheme::Explicit { probs } => {
                probs.get((k - 1) as usize).copied().unwrap_or(0.0)
            }
        }
    }

    /// Number of boxes, `None` when infinite.
    pub fn len(&self) -> Option<usize> {
        match self {
            DeterministicScheme::Geometric { .. } => None,
            DeterministicScheme::Explicit { probs } => Some(probs.len()),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl KarlinProbabilities for DeterministicScheme {
    fn probs_at_least(&self, floor: f64) -> Result<Vec<f64>> {
        if !(floor > 0.0) {
            return param_err("probability floor must be positive");
        }
        Ok(match self {
            DeterministicScheme::Geometric { .. } => (1..)
                .map(|k| self.prob(k))
                .take_while(|&p| p >= floor)
                .collect(),
            DeterministicScheme::Explicit { probs } => {
                probs.iter().copied().take_while(|&p| p >= floor).collect()
            }
        })
    }

    fn mass_below(&self, ceiling: f64) -> Result<f64> {
        Ok(match self {
            DeterministicScheme::Geometric { q } => {
                if ceiling > 1.0 - q {
                    return Ok(1.0);
                }
                let first = (1..).find(|&k| self.prob(k) < ceiling).unwrap_or(1);
                q.powf((first - 1) as f64)
            }
            DeterministicScheme::Explicit { probs } => {
                probs.iter().filter(|&&p| p < ceiling).sum()
            }
        })
    }
}

/// Occupancy counts of `n` balls thrown independently into the boxes of `scheme`.
///
/// Sequential binomial thinning: box `k` receives `Bin(remaining, p_k / Σ_{j≥k} p_j)`.
pub fn occupy_scheme<R: Rng + ?Sized>(
    scheme: &DeterministicScheme,
    n: u64,
    rng: &mut R,
) -> Result<OccupancyResult> {
    scheme.validate()?;
    let mut counts = Vec::new();
    let mut regimes = RegimeTally::default();
    let mut remaining = n;
    match scheme {
        DeterministicScheme::Geometric { q } => {
            let mut k = 1u64;
            while remaining > 0 {
                let (z, regime) = sample_binomial_tracked(remaining, 1.0 - q, rng)?;
                regimes.record(regime);
                if z > 0 {
                    counts.push((k, z));
                }
                remaining -= z;
                k += 1;
            }
        }
        DeterministicScheme::Explicit { probs } => {
            let mut tail: Vec<f64> = probs.clone();
            for i in (0..tail.len().saturating_sub(1)).rev() {
                tail[i] += tail[i + 1];
            }
            for (i, &p) in probs.iter().enumerate() {
                if remaining == 0 {
                    break;
                }
                let cond = if i + 1 == probs.len() {
                    1.0
                } else {
                    (p / tail[i]).min(1.0)
                };
                let (z, regime) = sample_binomial_tracked(remaining, cond, rng)?;
                regimes.record(regime);
                if z > 0 {
                    counts.push((i as u64 + 1, z));
                }
                remaining -= z;
            }
        }
    }
    let mut occ = OccupancyResult::new(n, counts)?;
    occ.regimes = regimes;
    Ok(occ)
}
