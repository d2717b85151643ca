use rand::Rng;
use rand_distr::{Exp1, Open01};
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};
use crate::sampling::StickLaw;

/// Law of the walk step `ξ > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum XiLaw {
    Exponential { rate: f64 },
    /// `P{ξ > x} = x^{-α}` for `x ≥ 1`.
    Pareto { alpha: f64 },
    Constant { value: f64 },
    /// `ξ = |log W|`
    LogStick { law: StickLaw },
}

/// Law of the perturbation `η > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EtaLaw {
    Exponential { rate: f64 },
    Constant { value: f64 },
    /// `η = |log(1 - W)|`
    LogOneMinusStick { law: StickLaw },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dependence {
    #[default]
    Independent,
    /// One `W` per step gives `(ξ, η) = (|log W|, |log(1-W)|)`.
    SharedStick,
}

/// Joint law of the step pair `(ξ, η)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLaw {
    pub xi: XiLaw,
    pub eta: EtaLaw,
    #[serde(default)]
    pub dependence: Dependence,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return param_err(format!("{name} must be positive, got {v}"));
    }
    Ok(())
}

impl StepLaw {
    pub fn independent(xi: XiLaw, eta: EtaLaw) -> Result<Self> {
        let law = StepLaw {
            xi,
            eta,
            dependence: Dependence::Independent,
        };
        law.validate()?;
        Ok(law)
    }

    /// `(|log W|, |log(1-W)|)` from one stick per step.
    pub fn shared_stick(stick: StickLaw) -> Result<Self> {
        let law = StepLaw {
            xi: XiLaw::LogStick { law: stick.clone() },
            eta: EtaLaw::LogOneMinusStick { law: stick },
            dependence: Dependence::SharedStick,
        };
        law.validate()?;
        Ok(law)
    }

    /// Both components exponential with unit rate, independent.
    pub fn exp_exp() -> Self {
        StepLaw {
            xi: XiLaw::Exponential { rate: 1.0 },
            eta: EtaLaw::Exponential { rate: 1.0 },
            dependence: Dependence::Independent,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.xi {
            XiLaw::Exponential { rate } => check_positive("xi rate", *rate)?,
            XiLaw::Pareto { alpha } => check_positive("xi alpha", *alpha)?,
            XiLaw::Constant { value } => check_positive("xi value", *value)?,
            XiLaw::LogStick { law } => law.validate()?,
        }
        match &self.eta {
            EtaLaw::Exponential { rate } => check_positive("eta rate", *rate)?,
            EtaLaw::Constant { value } => check_positive("eta value", *value)?,
            EtaLaw::LogOneMinusStick { law } => law.validate()?,
        }
        if self.dependence == Dependence::SharedStick {
            match (&self.xi, &self.eta) {
                (XiLaw::LogStick { law: a }, EtaLaw::LogOneMinusStick { law: b }) if a == b => {}
                _ => {
                    return param_err(
                        "shared-stick steps need xi and eta built from the same stick law",
                    )
                }
            }
        }
        Ok(())
    }

    /// One step `(ξ, η)`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        if let (Dependence::SharedStick, XiLaw::LogStick { law }) = (self.dependence, &self.xi) {
            let s = law.draw(rng);
            return (s.xi, s.eta);
        }
        let xi = match &self.xi {
            XiLaw::Exponential { rate } => rng.sample::<f64, _>(Exp1) / rate,
            XiLaw::Pareto { alpha } => rng.sample::<f64, _>(Open01).powf(-1.0 / alpha),
            XiLaw::Constant { value } => *value,
            XiLaw::LogStick { law } => law.draw(rng).xi,
        };
        let eta = match &self.eta {
            EtaLaw::Exponential { rate } => rng.sample::<f64, _>(Exp1) / rate,
            EtaLaw::Constant { value } => *value,
            EtaLaw::LogOneMinusStick { law } => law.draw(rng).eta,
        };
        (xi, eta)
    }

    /// `m = Eξ`, possibly infinite.
    pub fn mean_xi(&self) -> f64 {
        match &self.xi {
            XiLaw::Exponential { rate } => 1.0 / rate,
            XiLaw::Pareto { alpha } => {
                if *alpha > 1.0 {
                    alpha / (alpha - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            XiLaw::Constant { value } => *value,
            XiLaw::LogStick { law } => law.mean_log(),
        }
    }

    /// `Var ξ`, possibly infinite.
    pub fn var_xi(&self) -> f64 {
        match &self.xi {
            XiLaw::Exponential { rate } => 1.0 / (rate * rate),
            XiLaw::Pareto { alpha } => {
                if *alpha > 2.0 {
                    alpha / ((alpha - 1.0).powi(2) * (alpha - 2.0))
                } else {
                    f64::INFINITY
                }
            }
            XiLaw::Constant { .. } => 0.0,
            XiLaw::LogStick { law } => law.var_log(),
        }
    }

    /// `P{ξ > x}`
    pub fn xi_tail(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        match &self.xi {
            XiLaw::Exponential { rate } => (-rate * x).exp(),
            XiLaw::Pareto { alpha } => {
                if x <= 1.0 {
                    1.0
                } else {
                    x.powf(-alpha)
                }
            }
            XiLaw::Constant { value } => {
                if x < *value {
                    1.0
                } else {
                    0.0
                }
            }
            XiLaw::LogStick { law } => law.xi_tail(x),
        }
    }

    /// `F(s) = P{η ≤ s}`
    pub fn eta_cdf(&self, s: f64) -> f64 {
        self.eta.cdf(s)
    }

    /// Points where `eta_cdf` is not smooth.
    pub fn eta_breaks(&self) -> Vec<f64> {
        self.eta.breaks()
    }
}

impl EtaLaw {
    /// `F(s) = P{η ≤ s}`
    pub fn cdf(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        match self {
            EtaLaw::Exponential { rate } => -(-rate * s).exp_m1(),
            EtaLaw::Constant { value } => {
                if s >= *value {
                    1.0
                } else {
                    0.0
                }
            }
            EtaLaw::LogOneMinusStick { law } => law.eta_cdf(s),
        }
    }

    /// Points where `cdf` is not smooth.
    pub fn breaks(&self) -> Vec<f64> {
        match self {
            EtaLaw::Exponential { .. } => Vec::new(),
            EtaLaw::Constant { value } => vec![*value],
            EtaLaw::LogOneMinusStick { law } => law.eta_breaks(),
        }
    }
}
