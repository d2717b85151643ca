use rand::Rng;
use rand_distr::{Exp1, Open01};
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};

/// Law of the stick-breaking factor `W ∈ (0,1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StickLaw {
    /// Beta(θ, 1): `W = U^{1/θ}`, so `|log W|` is exponential with rate θ.
    BetaThetaOne { theta: f64 },
    /// `|log W| = shift + P` with `P{P > x} = x^{-α}` for `x ≥ 1`.
    ExpPareto {
        alpha: f64,
        #[serde(default)]
        shift: f64,
    },
    /// Piecewise-linear CDF of `W` through `(w, F(w))` knots. Repeated `w`
    /// values encode atoms.
    UserTabulated { knots: Vec<(f64, f64)> },
}

/// One realized stick with both logarithmic transforms kept exactly.
///
/// `w` may underflow to zero for heavy-tailed `|log W|`; `xi` never does.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stick {
    pub w: f64,
    pub one_minus_w: f64,
    /// `|log W|`
    pub xi: f64,
    /// `|log(1 - W)|`
    pub eta: f64,
}

impl Stick {
    /// Build from `ξ = |log W|`.
    pub fn from_xi(xi: f64) -> Stick {
        let w = (-xi).exp();
        let one_minus_w = -(-xi).exp_m1();
        let eta = if w < 0.5 { -(-w).ln_1p() } else { -one_minus_w.ln() };
        Stick {
            w,
            one_minus_w,
            xi,
            eta,
        }
    }

    /// Build from `W` itself; `1 - W` is formed directly so dyadic sticks stay exact.
    pub fn from_w(w: f64) -> Stick {
        Stick {
            w,
            one_minus_w: 1.0 - w,
            xi: -w.ln(),
            eta: -(-w).ln_1p(),
        }
    }
}

impl StickLaw {
    pub fn beta(theta: f64) -> Result<StickLaw> {
        let law = StickLaw::BetaThetaOne { theta };
        law.validate()?;
        Ok(law)
    }

    pub fn exp_pareto(alpha: f64) -> Result<StickLaw> {
        let law = StickLaw::ExpPareto { alpha, shift: 0.0 };
        law.validate()?;
        Ok(law)
    }

    /// `W ≡ w`
    pub fn degenerate(w: f64) -> Result<StickLaw> {
        let law = StickLaw::UserTabulated {
            knots: vec![(w, 0.0), (w, 1.0)],
        };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StickLaw::BetaThetaOne { theta } => {
                if !(theta > 0.0 && theta.is_finite()) {
                    return param_err(format!("beta stick needs theta > 0, got {theta}"));
                }
            }
            StickLaw::ExpPareto { alpha, shift } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return param_err(format!("pareto stick needs alpha > 0, got {alpha}"));
                }
                if !(shift > -1.0 && shift.is_finite()) {
                    return param_err(format!("pareto stick needs shift > -1, got {shift}"));
                }
            }
            StickLaw::UserTabulated { ref knots } => {
                if knots.len() < 2 {
                    return param_err("tabulated stick needs at least two knots");
                }
                let (first, last) = (knots[0], knots[knots.len() - 1]);
                if first.1 != 0.0 || last.1 != 1.0 {
                    return param_err("tabulated CDF must run from 0 to 1");
                }
                for pair in knots.windows(2) {
                    let ((w0, f0), (w1, f1)) = (pair[0], pair[1]);
                    if w1 < w0 || f1 < f0 {
                        return param_err("tabulated knots must be nondecreasing");
                    }
                }
                if knots.iter().any(|&(w, _)| !(0.0..=1.0).contains(&w)) {
                    return param_err("tabulated support must lie in [0,1]");
                }
                // atoms at the endpoints would put mass outside (0,1)
                let mass_at = |x: f64| {
                    knots
                        .windows(2)
                        .filter(|p| p[0].0 == x && p[1].0 == x)
                        .map(|p| p[1].1 - p[0].1)
                        .sum::<f64>()
                };
                if mass_at(0.0) > 0.0 || mass_at(1.0) > 0.0 {
                    return param_err("tabulated law has an atom at 0 or 1");
                }
            }
        }
        Ok(())
    }

    /// Draw one stick. The law must already be valid.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Stick {
        match *self {
            StickLaw::BetaThetaOne { theta } => {
                let e: f64 = rng.sample(Exp1);
                Stick::from_xi(e / theta)
            }
            StickLaw::ExpPareto { alpha, shift } => {
                let u: f64 = rng.sample(Open01);
                Stick::from_xi(shift + u.powf(-1.0 / alpha))
            }
            StickLaw::UserTabulated { ref knots } => loop {
                let u: f64 = rng.sample(Open01);
                let w = tabulated_quantile(knots, u);
                if w > 0.0 && w < 1.0 {
                    return Stick::from_w(w);
                }
            },
        }
    }

    /// `μ = E|log W|`; infinite when the tail index is at most one.
    pub fn mean_log(&self) -> f64 {
        match *self {
            StickLaw::BetaThetaOne { theta } => 1.0 / theta,
            StickLaw::ExpPareto { alpha, shift } => {
                if alpha > 1.0 {
                    shift + alpha / (alpha - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            StickLaw::UserTabulated { ref knots } => tabulated_log_moment(knots, 1),
        }
    }

    /// `σ² = Var|log W|`
    pub fn var_log(&self) -> f64 {
        match *self {
            StickLaw::BetaThetaOne { theta } => 1.0 / (theta * theta),
            StickLaw::ExpPareto { alpha, .. } => {
                if alpha > 2.0 {
                    alpha / ((alpha - 1.0).powi(2) * (alpha - 2.0))
                } else {
                    f64::INFINITY
                }
            }
            StickLaw::UserTabulated { ref knots } => {
                let m1 = tabulated_log_moment(knots, 1);
                tabulated_log_moment(knots, 2) - m1 * m1
            }
        }
    }

    /// `P{|log W| > x}`
    pub fn xi_tail(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        match *self {
            StickLaw::BetaThetaOne { theta } => (-theta * x).exp(),
            StickLaw::ExpPareto { alpha, shift } => {
                let y = x - shift;
                if y <= 1.0 {
                    1.0
                } else {
                    y.powf(-alpha)
                }
            }
            StickLaw::UserTabulated { ref knots } => tabulated_cdf_left(knots, (-x).exp()),
        }
    }

    /// `F(s) = P{|log(1-W)| ≤ s}`
    pub fn eta_cdf(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match *self {
            StickLaw::BetaThetaOne { theta } => (theta * (-(-s).exp_m1()).ln()).exp(),
            StickLaw::ExpPareto { alpha, shift } => {
                // η ≤ s  ⇔  ξ ≥ -log(1 - e^{-s})
                let g = -(-(-s).exp_m1()).ln();
                let y = g - shift;
                if y <= 1.0 {
                    1.0
                } else {
                    y.powf(-alpha)
                }
            }
            StickLaw::UserTabulated { ref knots } => tabulated_cdf(knots, -(-s).exp_m1()),
        }
    }

    /// Points where `eta_cdf` has a kink or a jump.
    pub fn eta_breaks(&self) -> Vec<f64> {
        match *self {
            StickLaw::BetaThetaOne { .. } => Vec::new(),
            StickLaw::ExpPareto { shift, .. } => {
                // ξ = shift + 1 at the kink; η = -log(1 - e^{-ξ})
                vec![-(-(-(shift + 1.0)).exp()).ln_1p()]
            }
            StickLaw::UserTabulated { ref knots } => knots
                .iter()
                .filter(|&&(w, _)| w > 0.0 && w < 1.0)
                .map(|&(w, _)| -(-w).ln_1p())
                .collect(),
        }
    }
}

/// Draw `W` from `law`, validating it first.
pub fn sample_stick<R: Rng + ?Sized>(law: &StickLaw, rng: &mut R) -> Result<f64> {
    law.validate()?;
    Ok(law.draw(rng).w)
}

fn tabulated_quantile(knots: &[(f64, f64)], u: f64) -> f64 {
    // first knot whose F reaches u
    let i = knots.partition_point(|&(_, f)| f < u).min(knots.len() - 1);
    if i == 0 {
        return knots[0].0;
    }
    let (w0, f0) = knots[i - 1];
    let (w1, f1) = knots[i];
    if f1 == f0 {
        w1
    } else {
        w0 + (u - f0) / (f1 - f0) * (w1 - w0)
    }
}

/// `P{W ≤ w}`
fn tabulated_cdf(knots: &[(f64, f64)], w: f64) -> f64 {
    let i = knots.partition_point(|&(x, _)| x <= w);
    if i == 0 {
        return 0.0;
    }
    if i == knots.len() {
        return 1.0;
    }
    let (w0, f0) = knots[i - 1];
    let (w1, f1) = knots[i];
    f0 + (w - w0) / (w1 - w0) * (f1 - f0)
}

/// `P{W < w}`
fn tabulated_cdf_left(knots: &[(f64, f64)], w: f64) -> f64 {
    let i = knots.partition_point(|&(x, _)| x < w);
    if i == 0 {
        return 0.0;
    }
    if i == knots.len() {
        return 1.0;
    }
    let (w0, f0) = knots[i - 1];
    let (w1, f1) = knots[i];
    f0 + (w - w0) / (w1 - w0) * (f1 - f0)
}

/// `E|log W|^k` for k ∈ {1, 2}, exact per linear segment.
fn tabulated_log_moment(knots: &[(f64, f64)], k: u32) -> f64 {
    // antiderivatives of -ln w and ln² w
    let anti = |w: f64| -> f64 {
        if w == 0.0 {
            return 0.0;
        }
        let l = w.ln();
        match k {
            1 => w - w * l,
            _ => w * (l * l - 2.0 * l + 2.0),
        }
    };
    let point = |w: f64| -> f64 {
        let l = -w.ln();
        l.powi(k as i32)
    };
    knots
        .windows(2)
        .map(|p| {
            let ((w0, f0), (w1, f1)) = (p[0], p[1]);
            let mass = f1 - f0;
            if mass == 0.0 {
                0.0
            } else if w1 == w0 {
                mass * point(w0)
            } else {
                mass / (w1 - w0) * (anti(w1) - anti(w0))
            }
        })
        .sum()
}
