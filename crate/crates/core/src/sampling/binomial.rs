use rand::Rng;
use rand_distr::{Distribution, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result, SieveError};

/// Exact inversion while `n·min(p, 1-p)` is at most this.
const INVERSION_MAX_MEAN: f64 = 30.0;
/// Gaussian rounding once `n·p·(1-p)` exceeds this.
const GAUSSIAN_MIN_VARIANCE: f64 = 1e7;
const MAX_TRIALS: u64 = 1 << 62;

/// Which algorithm produced a binomial draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinomialRegime {
    /// Sequential search of the exact CDF.
    Inversion,
    /// BTPE accept-reject, exact.
    AcceptReject,
    /// `round(np + sqrt(npq)·Z)` clamped to `[0, n]`; approximate.
    GaussianRounded,
}

pub fn binomial_regime(n: u64, p: f64) -> BinomialRegime {
    let q = 1.0 - p;
    let nf = n as f64;
    if nf * p.min(q) <= INVERSION_MAX_MEAN {
        BinomialRegime::Inversion
    } else if nf * p * q > GAUSSIAN_MIN_VARIANCE {
        BinomialRegime::GaussianRounded
    } else {
        BinomialRegime::AcceptReject
    }
}

pub fn sample_binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> Result<u64> {
    sample_binomial_tracked(n, p, rng).map(|(k, _)| k)
}

/// Binomial(n, p) draw together with the regime that produced it.
pub fn sample_binomial_tracked<R: Rng + ?Sized>(
    n: u64,
    p: f64,
    rng: &mut R,
) -> Result<(u64, BinomialRegime)> {
    if !(0.0..=1.0).contains(&p) {
        return param_err(format!("binomial probability {p} outside [0,1]"));
    }
    if n > MAX_TRIALS {
        return Err(SieveError::Range(format!("binomial n = {n} exceeds 2^62")));
    }
    if n == 0 || p == 0.0 {
        return Ok((0, BinomialRegime::Inversion));
    }
    if p == 1.0 {
        return Ok((n, BinomialRegime::Inversion));
    }
    let regime = binomial_regime(n, p);
    let k = match regime {
        BinomialRegime::Inversion => {
            if p <= 0.5 {
                invert(n, p, rng)
            } else {
                n - invert(n, 1.0 - p, rng)
            }
        }
        BinomialRegime::AcceptReject => rand_distr::Binomial::new(n, p)
            .map_err(|e| SieveError::Parameter(e.to_string()))?
            .sample(rng),
        BinomialRegime::GaussianRounded => {
            let nf = n as f64;
            let z: f64 = rng.sample(StandardNormal);
            let x = (nf * p + (nf * p * (1.0 - p)).sqrt() * z).round();
            if x <= 0.0 {
                0
            } else if x >= nf {
                n
            } else {
                (x as u64).min(n)
            }
        }
    };
    Ok((k, regime))
}

/// Inversion by sequential search, `p ≤ 1/2` and `np ≤ 30`.
fn invert<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    let nf = n as f64;
    let ratio = p / (1.0 - p);
    let f0 = (nf * (-p).ln_1p()).exp();
    // The mean is at most 30, so the search never needs to pass this.
    let cap = n.min(400);
    'restart: loop {
        let mut u: f64 = rng.sample(Open01);
        let mut f = f0;
        let mut k = 0u64;
        loop {
            if u < f {
                return k;
            }
            u -= f;
            if k >= cap {
                continue 'restart;
            }
            f *= ratio * (nf - k as f64) / (k as f64 + 1.0);
            k += 1;
        }
    }
}
