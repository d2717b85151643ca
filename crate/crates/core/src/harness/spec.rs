use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SieveError};
use crate::limits::{SlowVariation, DEFAULT_MESH};
use crate::occupancy::{DeterministicScheme, DEFAULT_MIN_MASS};
use crate::prw::{StepLaw, XiLaw};
use crate::sampling::StickLaw;

/// Experiment families the harness can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Target {
    A1,
    A2,
    A3,
    T22,
    P21,
    B1,
    B2,
    B3,
    B4,
    P31,
    P32,
    P33,
    P41,
    EQ,
    #[serde(rename = "ESF_FLT")]
    EsfFlt,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Target::EsfFlt => "ESF_FLT".to_string(),
            other => format!("{other:?}"),
        };
        f.write_str(&s)
    }
}

/// Cycle-count sampler used by Ewens experiments.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleSampler {
    #[default]
    Crp,
    Feller,
    FellerSkip,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizerSpec {
    /// `"const"` or `"log"`
    pub ell: String,
    #[serde(default = "one")]
    pub a: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub b: f64,
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncrementSpec {
    pub x_values: Vec<f64>,
    pub y_values: Vec<f64>,
}

/// Integer written either as a TOML integer or as an integral float (`1e16`).
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
enum Count {
    Int(u64),
    Float(f64),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    target: Target,
    n_values: Vec<Count>,
    replicates: usize,
    #[serde(default)]
    grid: Vec<f64>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    ratio: bool,
    stick: Option<StickLaw>,
    step: Option<StepLaw>,
    scheme: Option<DeterministicScheme>,
    theta: Option<f64>,
    normalizer: Option<NormalizerSpec>,
    #[serde(default)]
    thresholds: BTreeMap<String, f64>,
    reference_draws: Option<usize>,
    mesh: Option<f64>,
    min_mass: Option<f64>,
    window: Option<WindowSpec>,
    increments: Option<IncrementSpec>,
    sampler: Option<CycleSampler>,
    compare_sieve: Option<bool>,
}

/// A parsed and validated experiment description.
///
/// Thresholds are calibration values chosen for finite `n`; the harness
/// reports them as such.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub target: Target,
    pub n_values: Vec<u64>,
    pub replicates: usize,
    pub grid: Vec<f64>,
    pub seed: u64,
    pub ratio: bool,
    pub stick: Option<StickLaw>,
    pub step: Option<StepLaw>,
    pub scheme: Option<DeterministicScheme>,
    pub theta: Option<f64>,
    pub normalizer: Option<SlowVariation>,
    pub thresholds: BTreeMap<String, f64>,
    pub reference_draws: usize,
    pub mesh: f64,
    pub min_mass: f64,
    pub window: Option<WindowSpec>,
    pub increments: Option<IncrementSpec>,
    pub sampler: CycleSampler,
    pub compare_sieve: bool,
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the first `key =` assignment or `[key` header, or 1.
fn line_of_key(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            let header = l.starts_with('[') && l.trim_start_matches('[').starts_with(key);
            let assign = l.starts_with(key) && l[key.len()..].trim_start().starts_with('=');
            header || assign
        })
        .map(|i| i + 1)
        .unwrap_or(1)
}

impl ExperimentSpec {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        ExperimentSpec::parse(&text)
    }

    /// Parse and validate a TOML experiment description. Errors carry the
    /// line of the offending entry.
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawSpec = toml::from_str(text).map_err(|e| SieveError::Parse {
            line: e.span().map(|s| line_of_offset(text, s.start)).unwrap_or(1),
            message: e.message().trim().to_string(),
        })?;
        let at = |key: &str, message: String| SieveError::Parse {
            line: line_of_key(text, key),
            message,
        };
        let n_values = raw
            .n_values
            .iter()
            .map(|c| match *c {
                Count::Int(v) if v >= 1 => Ok(v),
                Count::Float(v) if v >= 1.0 && v.fract() == 0.0 && v < 1.8e19 => Ok(v as u64),
                _ => Err(at("n_values", format!("n values must be positive integers, got {c:?}"))),
            })
            .collect::<Result<Vec<u64>>>()?;
        let normalizer = raw
            .normalizer
            .as_ref()
            .map(|n| SlowVariation::from_name(&n.ell, n.a))
            .transpose()
            .map_err(|e| at("normalizer", e.to_string()))?;
        let spec = ExperimentSpec {
            target: raw.target,
            n_values,
            replicates: raw.replicates,
            grid: raw.grid,
            seed: raw.seed,
            ratio: raw.ratio,
            stick: raw.stick,
            step: raw.step,
            scheme: raw.scheme,
            theta: raw.theta,
            normalizer,
            thresholds: raw.thresholds,
            reference_draws: raw.reference_draws.unwrap_or(10_000),
            mesh: raw.mesh.unwrap_or(DEFAULT_MESH),
            min_mass: raw.min_mass.unwrap_or(DEFAULT_MIN_MASS),
            window: raw.window,
            increments: raw.increments,
            sampler: raw.sampler.unwrap_or_default(),
            compare_sieve: raw.compare_sieve.unwrap_or(true),
        };
        spec.validate().map_err(|(key, message)| at(key, message))?;
        Ok(spec)
    }

    /// A spec with the common fields set and everything else defaulted.
    pub fn new(target: Target, n_values: Vec<u64>, replicates: usize, grid: Vec<f64>, seed: u64) -> Self {
        ExperimentSpec {
            target,
            n_values,
            replicates,
            grid,
            seed,
            ratio: false,
            stick: None,
            step: None,
            scheme: None,
            theta: None,
            normalizer: None,
            thresholds: BTreeMap::new(),
            reference_draws: 10_000,
            mesh: DEFAULT_MESH,
            min_mass: DEFAULT_MIN_MASS,
            window: None,
            increments: None,
            sampler: CycleSampler::default(),
            compare_sieve: true,
        }
    }

    pub fn threshold(&self, key: &str) -> Option<f64> {
        self.thresholds.get(key).copied()
    }

    pub fn stick_law(&self) -> Result<&StickLaw> {
        self.stick
            .as_ref()
            .ok_or_else(|| SieveError::Configuration(format!("{} needs a [stick] law", self.target)))
    }

    pub fn step_law(&self) -> Result<&StepLaw> {
        self.step
            .as_ref()
            .ok_or_else(|| SieveError::Configuration(format!("{} needs a [step] law", self.target)))
    }

    pub fn theta_value(&self) -> Result<f64> {
        self.theta
            .ok_or_else(|| SieveError::Configuration(format!("{} needs theta", self.target)))
    }

    /// Tail index of `|log W|` (sieve targets) or `ξ` (walk targets) when it is Pareto.
    pub fn pareto_alpha(&self) -> Option<f64> {
        match self.target {
            Target::A2 | Target::A3 | Target::T22 => match self.stick {
                Some(StickLaw::ExpPareto { alpha, .. }) => Some(alpha),
                _ => None,
            },
            Target::B2 | Target::B3 | Target::B4 => match self.step {
                Some(StepLaw {
                    xi: XiLaw::Pareto { alpha },
                    ..
                }) => Some(alpha),
                Some(StepLaw {
                    xi: XiLaw::LogStick {
                        law: StickLaw::ExpPareto { alpha, .. },
                    },
                    ..
                }) => Some(alpha),
                _ => None,
            },
            _ => None,
        }
    }

    /// Slowly varying factor, defaulting to `2 log x` for index 2 and `1` otherwise.
    pub fn slow_variation(&self) -> SlowVariation {
        self.normalizer.unwrap_or(match self.target {
            Target::A2 | Target::B2 => SlowVariation::Log { a: 2.0 },
            _ => SlowVariation::Constant { a: 1.0 },
        })
    }

    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        let t = self.target;
        if self.n_values.is_empty() {
            return Err(("n_values", "n_values must not be empty".into()));
        }
        if self.replicates == 0 {
            return Err(("replicates", "replicates must be positive".into()));
        }
        if self.replicates > u32::MAX as usize {
            return Err(("replicates", "too many replicates".into()));
        }
        let prw_target = matches!(t, Target::B1 | Target::B2 | Target::B3 | Target::B4);
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(("grid", "grid must be strictly increasing".into()));
        }
        if self.grid.iter().any(|&g| !(g >= 0.0 && (prw_target || g <= 1.0))) {
            return Err(("grid", "grid points must lie in [0,1] ([0,T] for walk targets)".into()));
        }
        let needs_grid = !matches!(t, Target::P21 | Target::P32 | Target::P33 | Target::P41);
        if needs_grid && self.grid.is_empty() {
            return Err(("grid", format!("{t} needs a grid")));
        }
        if !(self.mesh > 0.0 && self.mesh < 1.0) {
            return Err(("mesh", "mesh must lie in (0,1)".into()));
        }
        if !(self.min_mass > 0.0 && self.min_mass < 1.0) {
            return Err(("min_mass", "min_mass must lie in (0,1)".into()));
        }
        if self.reference_draws < 2 {
            return Err(("reference_draws", "need at least two reference draws".into()));
        }
        if self.n_values.iter().any(|&n| n > 1 << 62) {
            return Err(("n_values", "n values above 2^62 are not supported".into()));
        }
        let sieve = matches!(t, Target::A1 | Target::A2 | Target::A3 | Target::T22 | Target::P21);
        if sieve {
            let stick = self.stick.as_ref().ok_or(("target", format!("{t} needs a [stick] law")))?;
            stick.validate().map_err(|e| ("stick", e.to_string()))?;
            let (mu, var) = (stick.mean_log(), stick.var_log());
            let alpha = self.pareto_alpha();
            match t {
                Target::A1 if !var.is_finite() => {
                    return Err(("stick", "A1 needs finite Var|log W|".into()))
                }
                Target::A2 if !(mu.is_finite() && !var.is_finite() && alpha == Some(2.0)) => {
                    return Err(("stick", "A2 needs |log W| Pareto with index 2".into()))
                }
                Target::A3 if !matches!(alpha, Some(a) if a > 1.0 && a < 2.0) => {
                    return Err(("stick", "A3 needs |log W| Pareto with index in (1,2)".into()))
                }
                Target::T22 if !matches!(alpha, Some(a) if a > 0.0 && a < 1.0) => {
                    return Err(("stick", "T22 needs |log W| Pareto with index in (0,1)".into()))
                }
                Target::P21 if !mu.is_finite() => {
                    return Err(("stick", "P21 needs a finite mean of |log W|".into()))
                }
                _ => {}
            }
        }
        let walk = prw_target || matches!(t, Target::P31 | Target::P32 | Target::P33);
        if walk {
            let step = self.step.as_ref().ok_or(("target", format!("{t} needs a [step] law")))?;
            step.validate().map_err(|e| ("step", e.to_string()))?;
            let (m, v) = (step.mean_xi(), step.var_xi());
            let alpha = self.pareto_alpha();
            match t {
                Target::B1 if !v.is_finite() => return Err(("step", "B1 needs finite Var ξ".into())),
                Target::B2 if !(m.is_finite() && !v.is_finite() && alpha == Some(2.0)) => {
                    return Err(("step", "B2 needs ξ Pareto with index 2".into()))
                }
                Target::B3 if !matches!(alpha, Some(a) if a > 1.0 && a < 2.0) => {
                    return Err(("step", "B3 needs ξ Pareto with index in (1,2)".into()))
                }
                Target::B4 if !matches!(alpha, Some(a) if a > 0.0 && a < 1.0) => {
                    return Err(("step", "B4 needs ξ Pareto with index in (0,1)".into()))
                }
                Target::P31 if !m.is_finite() => {
                    return Err(("step", "P31 needs a finite mean step".into()))
                }
                _ => {}
            }
        }
        if t == Target::P32 {
            let w = self.window.ok_or(("target", "P32 needs a [window] with b and c".to_string()))?;
            if !(w.b > 0.0 && w.c > 0.0) {
                return Err(("window", "window b and c must be positive".into()));
            }
        }
        if t == Target::P33 {
            let inc = self.increments.as_ref().ok_or(("target", "P33 needs [increments]".to_string()))?;
            if inc.x_values.iter().chain(&inc.y_values).any(|&v| !(v >= 0.0)) {
                return Err(("increments", "x and y values must be nonnegative".into()));
            }
        }
        if t == Target::P41 {
            let s = self.scheme.as_ref().ok_or(("target", "P41 needs a [scheme]".to_string()))?;
            s.validate().map_err(|e| ("scheme", e.to_string()))?;
            if self.n_values.iter().any(|&n| n < 3) {
                return Err(("n_values", "P41 needs n >= 3".into()));
            }
            if self.replicates < 100 {
                return Err(("replicates", "P41 needs at least 100 replicates".into()));
            }
        }
        if matches!(t, Target::EQ | Target::EsfFlt) {
            let theta = self.theta.ok_or(("target", format!("{t} needs theta")))?;
            if !(theta > 0.0 && theta.is_finite()) {
                return Err(("theta", "theta must be positive".into()));
            }
        }
        const KEYS: [&str; 8] = [
            "ks",
            "ks_final",
            "ks_trend",
            "cov_tol",
            "corr_tol",
            "eq_ks",
            "self_similarity_ks",
            "median_max",
        ];
        if let Some(k) = self.thresholds.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(("thresholds", format!("unknown threshold key {k:?}")));
        }
        if self.ratio && !sieve {
            return Err(("ratio", "ratio mode applies to sieve targets only".into()));
        }
        if self.normalizer.is_some() && !matches!(t, Target::A2 | Target::A3 | Target::T22 | Target::B2 | Target::B3 | Target::B4) {
            return Err(("normalizer", format!("{t} takes no normalizer")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const A1: &str = r#"
target = "A1"
n_values = [10000, 1e8]
replicates = 20
grid = [0.5, 1.0]
seed = 3

[stick]
kind = "beta_theta_one"
theta = 1.0

[thresholds]
ks = 0.1
"#;

    #[test]
    fn parses_mixed_number_forms() {
        let s = ExperimentSpec::parse(A1).unwrap();
        assert_eq!(s.n_values, vec![10_000, 100_000_000]);
        assert_eq!(s.threshold("ks"), Some(0.1));
        assert_eq!(s.min_mass, DEFAULT_MIN_MASS);
    }

    fn parse_line(text: &str) -> usize {
        match ExperimentSpec::parse(text) {
            Err(SieveError::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_are_line_anchored() {
        let bad = A1.replace("replicates = 20", "replicates = twenty");
        assert_eq!(parse_line(&bad), 4);
        let bad = A1.replace("seed = 3", "sed = 3");
        assert!(parse_line(&bad) >= 1);
    }

    #[test]
    fn semantic_errors_are_line_anchored() {
        let bad = A1.replace("grid = [0.5, 1.0]", "grid = [1.0, 0.5]");
        assert_eq!(parse_line(&bad), 5);
        let bad = A1.replace("theta = 1.0", "theta = -1.0");
        assert_eq!(parse_line(&bad), 8);
        let bad = A1.replace("n_values = [10000, 1e8]", "n_values = [0.5]");
        assert_eq!(parse_line(&bad), 3);
        let bad = A1.replace("\"beta_theta_one\"\ntheta = 1.0", "\"exp_pareto\"\nalpha = 1.5");
        assert_eq!(parse_line(&bad), 8);
    }

    #[test]
    fn target_law_mismatch() {
        let bad = A1.replace("target = \"A1\"", "target = \"B1\"");
        assert!(ExperimentSpec::parse(&bad).is_err());
        let unsupported = format!("{A1}\n[normalizer]\nell = \"loglog\"\n").replace("\"A1\"", "\"A2\"");
        assert!(ExperimentSpec::parse(&unsupported).is_err());
    }

    #[test]
    fn walk_and_scheme_tables() {
        let text = r#"
target = "B1"
n_values = [1000]
replicates = 10
grid = [1.0, 2.0]

[step.xi]
kind = "exponential"
rate = 1.0

[step.eta]
kind = "constant"
value = 0.5
"#;
        let s = ExperimentSpec::parse(text).unwrap();
        assert_eq!(s.step.unwrap().mean_xi(), 1.0);
        let text = r#"
target = "P41"
n_values = [1000000]
replicates = 100

[scheme]
kind = "geometric"
q = 0.5
"#;
        let s = ExperimentSpec::parse(text).unwrap();
        assert!(s.scheme.is_some());
        assert_eq!(Target::EsfFlt.to_string(), "ESF_FLT");
    }
}
