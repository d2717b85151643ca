//! Karlin occupancy schemes with deterministic or stick-breaking box
//! probabilities, the occupancy step functions `K_n(t)`, the counting
//! function `ρ`, and both sides of the uniform approximation bound.

mod bound;
mod env;
mod result;
mod scheme;

pub use bound::{
    approximation_bound_lhs_estimate, approximation_bound_rhs, expected_occupancy_oracle,
    sup_deviation, x0, BoundTerms, OccupancyMoment,
};
pub use env::{build_environment, occupy_sieve, EnvironmentRecord, SieveEnvironment, DEFAULT_MIN_MASS};
pub use result::{k_process, KProcess, OccupancyResult, RegimeTally};
pub use scheme::{occupy_scheme, DeterministicScheme};

use crate::error::Result;

/// Box probabilities `(p_k)` of a Karlin scheme, queried from above.
pub trait KarlinProbabilities {
    /// Every `p_k ≥ floor`, in box order. Fails if the realization does not
    /// resolve boxes that small.
    fn probs_at_least(&self, floor: f64) -> Result<Vec<f64>>;

    /// `Σ_{k: p_k < ceiling} p_k`
    fn mass_below(&self, ceiling: f64) -> Result<f64>;
}

/// `ρ(x) = #{k : p_k ≥ 1/x}`
pub fn rho<P: KarlinProbabilities + ?Sized>(probs: &P, x: f64) -> Result<u64> {
    if !(x > 0.0) {
        return crate::error::param_err(format!("rho needs x > 0, got {x}"));
    }
    let floor = 1.0 / x;
    Ok(probs.probs_at_least(floor)?.iter().filter(|&&p| p >= floor).count() as u64)
}

/// `ρ(n) - ρ(n^{(1-t)-}) = #{k : 1/n < p_k ≤ n^{t-1}}` for each grid `t`.
pub fn reversed_rho_increment<P: KarlinProbabilities + ?Sized>(
    probs: &P,
    n: u64,
    grid: &[f64],
) -> Result<Vec<u64>> {
    if n < 2 {
        return crate::error::param_err("reversed rho increment needs n >= 2");
    }
    if grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return crate::error::param_err("grid must lie in [0,1]");
    }
    let nf = n as f64;
    let lower = 1.0 / nf;
    let ps = probs.probs_at_least(lower)?;
    Ok(grid
        .iter()
        .map(|&t| {
            let upper = nf.powf(t - 1.0);
            ps.iter().filter(|&&p| p > lower && p <= upper).count() as u64
        })
        .collect())
}
