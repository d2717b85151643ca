//! Ewens permutations through their cycle counts: two samplers, the exact
//! sampling formula, and the step function `C_n(t)`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result, SieveError};
use crate::special::{ln_factorial, ln_gamma};
use crate::steps::floor_pow;

/// `C_{n,r}`, the number of cycles of length `r`, for nonzero entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleCounts {
    pub n: u64,
    pub theta: f64,
    pub counts: BTreeMap<u64, u64>,
}

impl CycleCounts {
    pub fn from_lengths(n: u64, theta: f64, lengths: impl IntoIterator<Item = u64>) -> Self {
        let mut counts = BTreeMap::new();
        for r in lengths {
            *counts.entry(r).or_insert(0) += 1;
        }
        CycleCounts { n, theta, counts }
    }

    /// Checks `Σ r·C_{n,r} = n`.
    pub fn validate(&self) -> Result<()> {
        let total = self
            .counts
            .iter()
            .try_fold(0u64, |acc, (&r, &c)| r.checked_mul(c).and_then(|v| acc.checked_add(v)));
        if self.counts.contains_key(&0) || total != Some(self.n) {
            return Err(SieveError::Constraint(format!(
                "cycle counts do not add up to n = {}",
                self.n
            )));
        }
        Ok(())
    }

    pub fn cycles(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn count(&self, r: u64) -> u64 {
        self.counts.get(&r).copied().unwrap_or(0)
    }
}

fn check_params(n: u64, theta: f64) -> Result<()> {
    if n == 0 {
        return param_err("n must be at least 1");
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return param_err(format!("theta must be positive, got {theta}"));
    }
    Ok(())
}

/// Fenwick tree over table sizes that grows by doubling.
struct SizeTree {
    sizes: Vec<u64>,
    tree: Vec<u64>,
}

impl SizeTree {
    fn new() -> Self {
        SizeTree {
            sizes: Vec::new(),
            tree: vec![0; 2],
        }
    }

    fn add(&mut self, idx: usize, delta: u64) {
        self.sizes[idx] += delta;
        let mut i = idx + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    fn push(&mut self) {
        if self.sizes.len() + 1 >= self.tree.len() {
            let cap = self.tree.len() * 2;
            self.tree = vec![0; cap];
            let sizes = std::mem::take(&mut self.sizes);
            self.sizes = vec![0; sizes.len()];
            for (i, s) in sizes.into_iter().enumerate() {
                self.add(i, s);
            }
        }
        self.sizes.push(0);
        self.add(self.sizes.len() - 1, 1);
    }

    /// Table holding the `target`-th seated customer (0-based).
    fn find(&self, mut target: u64) -> usize {
        let mut pos = 0;
        let mut step = (self.tree.len() / 2).next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= target {
                target -= self.tree[next];
                pos = next;
            }
            step /= 2;
        }
        pos
    }
}

/// Chinese restaurant process: customer `i` opens a new table with
/// probability `θ/(θ+i-1)`, otherwise joins a table with probability
/// proportional to its size. Memory is proportional to the number of tables.
pub fn sample_cycles_crp<R: Rng + ?Sized>(n: u64, theta: f64, rng: &mut R) -> Result<CycleCounts> {
    check_params(n, theta)?;
    let mut tables = SizeTree::new();
    for i in 0..n {
        let seated = i as f64;
        if rng.random::<f64>() * (theta + seated) < theta {
            tables.push();
        } else {
            let target = rng.random_range(0..i);
            let t = tables.find(target);
            tables.add(t, 1);
        }
    }
    Ok(CycleCounts::from_lengths(n, theta, tables.sizes))
}

/// Feller coupling: independent `ξ_i ~ Bernoulli(θ/(θ+i-1))` for `i ≤ n` and
/// `ξ_{n+1} = 1`; cycle lengths are the spacings between successive ones.
pub fn sample_cycles_feller<R: Rng + ?Sized>(n: u64, theta: f64, rng: &mut R) -> Result<CycleCounts> {
    check_params(n, theta)?;
    let mut lengths = Vec::new();
    let mut last_one = 1u64;
    for i in 2..=n {
        if rng.random::<f64>() * (theta + (i - 1) as f64) < theta {
            lengths.push(i - last_one);
            last_one = i;
        }
    }
    lengths.push(n + 1 - last_one);
    Ok(CycleCounts::from_lengths(n, theta, lengths))
}

/// Feller coupling drawn spacing by spacing.
///
/// After a one at position `i`, the next one lies beyond `j` with probability
/// `Γ(j)Γ(θ+i) / (Γ(i)Γ(θ+j))` (`i/j` when `θ = 1`); the gap is drawn by
/// inverting this tail, so the cost is proportional to the number of cycles.
pub fn sample_cycles_feller_skip<R: Rng + ?Sized>(
    n: u64,
    theta: f64,
    rng: &mut R,
) -> Result<CycleCounts> {
    check_params(n, theta)?;
    let mut lengths = Vec::new();
    let mut i = 1u64;
    loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        let next = if theta == 1.0 {
            // smallest j with i/j < u
            let j = (i as f64 / u).floor() + 1.0;
            if j > n as f64 {
                n + 1
            } else {
                j as u64
            }
        } else {
            let base = ln_gamma(theta + i as f64) - ln_gamma(i as f64);
            let log_tail = |j: u64| base + ln_gamma(j as f64) - ln_gamma(theta + j as f64);
            let log_u = u.ln();
            if log_tail(n) >= log_u {
                n + 1
            } else {
                let (mut lo, mut hi) = (i, n);
                while hi - lo > 1 {
                    let mid = lo + (hi - lo) / 2;
                    if log_tail(mid) < log_u {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
        };
        lengths.push(next - i);
        if next > n {
            break;
        }
        i = next;
    }
    Ok(CycleCounts::from_lengths(n, theta, lengths))
}

/// Ewens sampling formula `n! Γ(θ)/Γ(θ+n) Π_r θ^{c_r} / (r^{c_r} c_r!)`.
pub fn esf_probability(counts: &CycleCounts) -> Result<f64> {
    counts.validate()?;
    let theta = counts.theta;
    if !(theta > 0.0) {
        return param_err("theta must be positive");
    }
    let mut log_p = ln_factorial(counts.n) + ln_gamma(theta) - ln_gamma(theta + counts.n as f64);
    for (&r, &c) in &counts.counts {
        log_p += c as f64 * (theta.ln() - (r as f64).ln()) - ln_factorial(c);
    }
    Ok(log_p.exp().min(1.0))
}

/// Every cycle type of a permutation of `n`, as `r → c_r` maps.
pub fn cycle_types(n: u64) -> Vec<BTreeMap<u64, u64>> {
    fn rec(rest: u64, max_part: u64, current: &mut Vec<u64>, out: &mut Vec<BTreeMap<u64, u64>>) {
        if rest == 0 {
            let mut m = BTreeMap::new();
            for &p in current.iter() {
                *m.entry(p).or_insert(0) += 1;
            }
            out.push(m);
            return;
        }
        for part in (1..=max_part.min(rest)).rev() {
            current.push(part);
            rec(rest - part, part, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, n, &mut Vec::new(), &mut out);
    out
}

/// `C_n(t) = Σ_{r ≤ ⌊n^t⌋} C_{n,r}` on `grid`.
pub fn c_process(counts: &CycleCounts, grid: &[f64]) -> Result<Vec<u64>> {
    if grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return param_err("grid must lie in [0,1]");
    }
    Ok(grid
        .iter()
        .map(|&t| {
            let cap = floor_pow(counts.n, t);
            counts.counts.range(..=cap).map(|(_, &c)| c).sum()
        })
        .collect())
}
