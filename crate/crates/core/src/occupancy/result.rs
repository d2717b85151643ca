use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result, SieveError};
use crate::sampling::BinomialRegime;
use crate::steps::floor_pow;

/// How many binomial draws of each regime produced an occupancy vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeTally {
    pub inversion: u64,
    pub accept_reject: u64,
    pub gaussian_rounded: u64,
}

impl RegimeTally {
    pub fn record(&mut self, regime: BinomialRegime) {
        match regime {
            BinomialRegime::Inversion => self.inversion += 1,
            BinomialRegime::AcceptReject => self.accept_reject += 1,
            BinomialRegime::GaussianRounded => self.gaussian_rounded += 1,
        }
    }

    pub fn merge(&mut self, other: &RegimeTally) {
        self.inversion += other.inversion;
        self.accept_reject += other.accept_reject;
        self.gaussian_rounded += other.gaussian_rounded;
    }
}

/// Occupancy counts of `n` balls, stored as `(box, count)` pairs with
/// 1-based box indices and nonzero counts, sorted by box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyResult {
    pub n: u64,
    pub counts: Vec<(u64, u64)>,
    #[serde(default)]
    pub regimes: RegimeTally,
}

impl OccupancyResult {
    /// Build from `(box, count)` pairs, checking they account for all `n` balls.
    pub fn new(n: u64, mut counts: Vec<(u64, u64)>) -> Result<Self> {
        counts.retain(|&(_, c)| c > 0);
        counts.sort_unstable();
        if counts.iter().any(|&(i, _)| i == 0) {
            return param_err("box indices are 1-based");
        }
        if counts.windows(2).any(|w| w[0].0 == w[1].0) {
            return param_err("duplicate box index");
        }
        let total = counts
            .iter()
            .try_fold(0u64, |acc, &(_, c)| acc.checked_add(c))
            .ok_or_else(|| SieveError::Constraint("ball count overflow".into()))?;
        if total != n {
            return Err(SieveError::Constraint(format!(
                "counts sum to {total}, expected {n}"
            )));
        }
        Ok(OccupancyResult {
            n,
            counts,
            regimes: RegimeTally::default(),
        })
    }

    pub fn occupied(&self) -> u64 {
        self.counts.len() as u64
    }

    /// Count in box `i` (1-based).
    pub fn count(&self, i: u64) -> u64 {
        self.counts
            .binary_search_by_key(&i, |&(b, _)| b)
            .map(|pos| self.counts[pos].1)
            .unwrap_or(0)
    }

    /// Occupied counts in ascending order.
    pub fn sorted_counts(&self) -> Vec<u64> {
        let mut z: Vec<u64> = self.counts.iter().map(|&(_, c)| c).collect();
        z.sort_unstable();
        z
    }

    /// `K_{n,r}`: number of boxes holding exactly `r` balls.
    pub fn boxes_with(&self, r: u64) -> u64 {
        self.counts.iter().filter(|&&(_, c)| c == r).count() as u64
    }
}

/// `K_n(t)` sampled on a grid of `t ∈ [0,1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KProcess {
    pub grid: Vec<f64>,
    pub values: Vec<u64>,
    pub k_total: u64,
}

/// `K_n(t) = #{i : 1 ≤ Z_{n,i} ≤ ⌊n^t⌋}` on `grid`.
pub fn k_process(occ: &OccupancyResult, grid: &[f64]) -> Result<KProcess> {
    if grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return param_err("grid must lie in [0,1]");
    }
    let z = occ.sorted_counts();
    let values = grid
        .iter()
        .map(|&t| {
            let cap = floor_pow(occ.n, t);
            z.partition_point(|&c| c <= cap) as u64
        })
        .collect();
    Ok(KProcess {
        grid: grid.to_vec(),
        values,
        k_total: z.len() as u64,
    })
}
