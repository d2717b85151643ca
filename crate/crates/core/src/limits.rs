//! Limit laws of the occupancy and visit-count processes, their
//! normalizers, and the centering functions.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result, SieveError};
use crate::prw::EtaLaw;
use crate::quad::{integrate, integrate_with_breaks};
use crate::sampling::{
    sample_inverse_subordinator_marginal, sample_spectrally_negative_stable, subordinator_passages,
    PassageQuery, StickLaw,
};
use crate::stats::ks_two_sample;

pub use crate::special::normal_cdf;

pub const DEFAULT_MESH: f64 = 1e-4;

fn default_mesh() -> f64 {
    DEFAULT_MESH
}

/// One-dimensional marginal of a limit process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitLaw {
    /// `B(t)`
    BrownianMarginal { t: f64 },
    /// `B(t) - tB(1)`
    BrownianBridgeMarginal { t: f64 },
    /// `S_α(t)`, spectrally negative, `α ∈ (1,2)`.
    StableMarginal { alpha: f64, t: f64 },
    /// `W^←(1) - W^←((1-t)-)` for the inverse α-stable subordinator.
    InverseSubordinatorReversal {
        alpha: f64,
        t: f64,
        #[serde(default = "default_mesh")]
        mesh: f64,
    },
    /// `1 - W^←((1-t)-) / W^←(1)`
    InverseSubordinatorRatio {
        alpha: f64,
        t: f64,
        #[serde(default = "default_mesh")]
        mesh: f64,
    },
}

impl LimitLaw {
    pub fn validate(&self) -> Result<()> {
        let check_t = |t: f64| {
            if !(0.0..=1.0).contains(&t) {
                return param_err(format!("time {t} outside [0,1]"));
            }
            Ok(())
        };
        match *self {
            LimitLaw::BrownianMarginal { t } => {
                if !(t >= 0.0 && t.is_finite()) {
                    return param_err(format!("brownian time must be nonnegative, got {t}"));
                }
            }
            LimitLaw::BrownianBridgeMarginal { t } => check_t(t)?,
            LimitLaw::StableMarginal { alpha, t } => {
                if !(alpha > 1.0 && alpha < 2.0) {
                    return param_err(format!("stable index must lie in (1,2), got {alpha}"));
                }
                if !(t >= 0.0 && t.is_finite()) {
                    return param_err(format!("stable time must be nonnegative, got {t}"));
                }
            }
            LimitLaw::InverseSubordinatorReversal { alpha, t, mesh }
            | LimitLaw::InverseSubordinatorRatio { alpha, t, mesh } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return param_err(format!("subordinator index must lie in (0,1), got {alpha}"));
                }
                check_t(t)?;
                if !(mesh > 0.0 && mesh < 1.0) {
                    return param_err(format!("mesh must lie in (0,1), got {mesh}"));
                }
            }
        }
        Ok(())
    }
}

/// `(W^←(1) - W^←((1-t)-), 1 - W^←((1-t)-)/W^←(1))` for each `t` from one
/// discretized subordinator path. Paths with `W^←(1) = 0` on the lattice
/// are redrawn.
pub fn sample_reversal_functionals<R: Rng + ?Sized>(
    alpha: f64,
    ts: &[f64],
    mesh: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if ts.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return param_err("times must lie in [0,1]");
    }
    let mut queries = vec![PassageQuery {
        level: 1.0,
        left_limit: false,
    }];
    queries.extend(ts.iter().map(|&t| PassageQuery {
        level: 1.0 - t,
        left_limit: true,
    }));
    loop {
        let ans = subordinator_passages(alpha, &queries, mesh, rng)?;
        let top = ans[0];
        if top == 0.0 {
            continue;
        }
        let reversal = ans[1..].iter().map(|&low| top - low).collect();
        let ratio = ans[1..].iter().map(|&low| 1.0 - low / top).collect();
        return Ok((reversal, ratio));
    }
}

/// One draw from `law`.
pub fn sample_limit<R: Rng + ?Sized>(law: &LimitLaw, rng: &mut R) -> Result<f64> {
    law.validate()?;
    Ok(match *law {
        LimitLaw::BrownianMarginal { t } => t.sqrt() * rng.sample::<f64, _>(StandardNormal),
        LimitLaw::BrownianBridgeMarginal { t } => {
            (t * (1.0 - t)).sqrt() * rng.sample::<f64, _>(StandardNormal)
        }
        LimitLaw::StableMarginal { alpha, t } => {
            t.powf(1.0 / alpha) * sample_spectrally_negative_stable(alpha, rng)?
        }
        LimitLaw::InverseSubordinatorReversal { alpha, t, mesh } => {
            sample_reversal_functionals(alpha, &[t], mesh, rng)?.0[0]
        }
        LimitLaw::InverseSubordinatorRatio { alpha, t, mesh } => {
            sample_reversal_functionals(alpha, &[t], mesh, rng)?.1[0]
        }
    })
}

/// Halve the lattice mesh until the KS distance between path-sampled
/// `W^←(1)` and its exact marginal changes by less than 0.005.
pub fn stabilized_mesh<R: Rng + ?Sized>(
    alpha: f64,
    initial: f64,
    draws: usize,
    min_mesh: f64,
    rng: &mut R,
) -> Result<f64> {
    let exact: Vec<f64> = (0..draws)
        .map(|_| sample_inverse_subordinator_marginal(alpha, 1.0, rng))
        .collect::<Result<_>>()?;
    let ks_at = |h: f64, rng: &mut R| -> Result<f64> {
        let path: Vec<f64> = (0..draws)
            .map(|_| sample_reversal_functionals(alpha, &[1.0], h, rng).map(|v| v.0[0]))
            .collect::<Result<_>>()?;
        ks_two_sample(&path, &exact)
    };
    let mut h = initial;
    let mut ks = ks_at(h, rng)?;
    while h / 2.0 >= min_mesh {
        let next = ks_at(h / 2.0, rng)?;
        if (next - ks).abs() < 0.005 {
            return Ok(h);
        }
        h /= 2.0;
        ks = next;
    }
    Ok(h)
}

/// Slowly varying factor `ℓ` in `P{ξ > x} ~ x^{-α} ℓ(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlowVariation {
    /// `ℓ ≡ a`
    Constant { a: f64 },
    /// `ℓ(x) = a log x`
    Log { a: f64 },
}

impl SlowVariation {
    /// `"const"` or `"log"` with factor `a`.
    pub fn from_name(name: &str, a: f64) -> Result<Self> {
        match name {
            "const" | "constant" => Ok(SlowVariation::Constant { a }),
            "log" => Ok(SlowVariation::Log { a }),
            other => Err(SieveError::Configuration(format!(
                "unsupported slowly varying function {other:?}; use const or log"
            ))),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            SlowVariation::Constant { a } => a,
            SlowVariation::Log { a } => a * x.ln(),
        }
    }
}

/// Which normalization relation `c` solves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormalizerKind {
    /// `c(x)^{-2} x ℓ(c(x)) = 1`
    FiniteVarianceBoundary { ell: SlowVariation },
    /// `c(x)^{-α} x ℓ(c(x)) = 1`
    Stable { alpha: f64, ell: SlowVariation },
}

/// Solution of the normalization relation at `x`.
pub fn normalizer_c(kind: &NormalizerKind, x: f64) -> Result<f64> {
    let (alpha, ell) = match *kind {
        NormalizerKind::FiniteVarianceBoundary { ell } => (2.0, ell),
        NormalizerKind::Stable { alpha, ell } => (alpha, ell),
    };
    if !(alpha > 0.0 && alpha.is_finite()) {
        return param_err(format!("index must be positive, got {alpha}"));
    }
    if !(x > 0.0 && x.is_finite()) {
        return param_err(format!("argument must be positive, got {x}"));
    }
    match ell {
        SlowVariation::Constant { a } => {
            if !(a > 0.0) {
                return param_err("slowly varying constant must be positive");
            }
            Ok((a * x).powf(1.0 / alpha))
        }
        SlowVariation::Log { a } => {
            if !(a > 0.0) {
                return param_err("slowly varying factor must be positive");
            }
            // the larger root of c^α = a x log c attracts the damped iteration
            let g = |c: f64| (a * x * c.ln()).powf(1.0 / alpha);
            let mut c = (a * x * (a * x + std::f64::consts::E).ln())
                .powf(1.0 / alpha)
                .max(std::f64::consts::E);
            for _ in 0..100_000 {
                let next = 0.5 * c + 0.5 * g(c);
                if !(next > 1.0 && next.is_finite()) {
                    break;
                }
                if ((next - c) / c).abs() < 1e-13 {
                    return Ok(next);
                }
                c = next;
            }
            Err(SieveError::Range(format!(
                "normalizer iteration did not converge at x = {x}"
            )))
        }
    }
}

/// `∫_{s1}^{s2} (1 - (1-e^{-s})^θ) ds`
fn beta_eta_complement_integral(theta: f64, s1: f64, s2: f64) -> f64 {
    if theta.fract() == 0.0 && theta <= 64.0 {
        // binomial expansion of 1 - (1-e^{-s})^θ
        let k_max = theta as u32;
        let mut acc = 0.0;
        let mut binom = 1.0;
        for k in 1..=k_max {
            binom *= (k_max - k + 1) as f64 / k as f64;
            let kf = k as f64;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * binom * ((-kf * s1).exp() - (-kf * s2).exp()) / kf;
        }
        acc
    } else {
        integrate(
            |s| -(theta * (-(-s).exp()).ln_1p()).exp_m1(),
            s1,
            s2,
            1e-13,
        )
    }
}

/// `μ^{-1} ∫_a^b F(s) ds` with `F` the law of `|log(1-W)|`.
fn eta_integral(stick: &StickLaw, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    match *stick {
        StickLaw::BetaThetaOne { theta } => (b - a) - beta_eta_complement_integral(theta, a, b),
        _ => {
            let breaks = stick.eta_breaks();
            // F rises to 1 quickly; integrate 1 - F so the long flat part is cheap
            (b - a) - integrate_with_breaks(|s| 1.0 - stick.eta_cdf(s), a, b, &breaks, 1e-12)
        }
    }
}

/// `(u_n(t), v_n(t))` with `u_n(t) = μ^{-1}∫_{(1-t)log n}^{log n} F(s) ds`
/// and `v_n(t) = μ^{-1} t log n - u_n(t)`.
pub fn centering_u_v(stick: &StickLaw, n: f64, t: f64) -> Result<(f64, f64)> {
    stick.validate()?;
    let mu = stick.mean_log();
    if !mu.is_finite() {
        return Err(SieveError::Configuration(
            "centering needs a finite mean of |log W|".into(),
        ));
    }
    if !(0.0..=1.0).contains(&t) {
        return param_err(format!("t = {t} outside [0,1]"));
    }
    if !(n >= 1.0) {
        return param_err("n must be at least 1");
    }
    let l = n.ln();
    let u = eta_integral(stick, (1.0 - t) * l, l) / mu;
    Ok((u, t * l / mu - u))
}

/// `m^{-1}∫_0^{nt} F(u) du` with `F` the law of `η`.
pub fn centering_prw(eta: &EtaLaw, n: f64, t: f64, m: f64) -> Result<f64> {
    if !(m > 0.0 && m.is_finite()) {
        return param_err(format!("mean step must be positive and finite, got {m}"));
    }
    let x = n * t;
    if !(x >= 0.0) {
        return param_err("n t must be nonnegative");
    }
    let integral = match *eta {
        EtaLaw::Exponential { rate } => x + (-rate * x).exp_m1() / rate,
        EtaLaw::Constant { value } => (x - value).max(0.0),
        EtaLaw::LogOneMinusStick { ref law } => eta_integral(law, 0.0, x),
    };
    Ok(integral / m)
}
