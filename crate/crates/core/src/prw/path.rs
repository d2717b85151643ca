use rand::Rng;
use serde::{Deserialize, Serialize};

use super::law::StepLaw;
use crate::error::{param_err, Result, SieveError};
use crate::occupancy::SieveEnvironment;

#[derive(Serialize, Deserialize)]
struct PathRecord {
    s_values: Vec<f64>,
    t_values: Vec<f64>,
    horizon: f64,
}

/// A realized perturbed random walk `T_k = S_{k-1} + η_k`.
///
/// `s_values` holds `S_0 = 0, S_1, ..., S_K` and `t_values` holds
/// `T_1, ..., T_K`. Counts at `x` are exact for `x < horizon = S_K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathRecord", into = "PathRecord")]
pub struct PrwPath {
    s_values: Vec<f64>,
    t_values: Vec<f64>,
    sorted_t: Vec<f64>,
}

impl TryFrom<PathRecord> for PrwPath {
    type Error = SieveError;

    fn try_from(rec: PathRecord) -> Result<Self> {
        let path = PrwPath::from_parts(rec.s_values, rec.t_values)?;
        if path.horizon() != rec.horizon {
            return Err(SieveError::Configuration(
                "path horizon disagrees with s_values".into(),
            ));
        }
        Ok(path)
    }
}

impl From<PrwPath> for PathRecord {
    fn from(p: PrwPath) -> Self {
        let horizon = p.horizon();
        PathRecord {
            s_values: p.s_values,
            t_values: p.t_values,
            horizon,
        }
    }
}

impl PrwPath {
    pub fn from_parts(s_values: Vec<f64>, t_values: Vec<f64>) -> Result<Self> {
        if s_values.first() != Some(&0.0) {
            return param_err("s_values must start at 0");
        }
        if t_values.len() + 1 != s_values.len() {
            return param_err("need exactly one t value per step");
        }
        if s_values.windows(2).any(|w| !(w[1] > w[0])) {
            return param_err("s_values must be strictly increasing");
        }
        if t_values.iter().zip(&s_values).any(|(t, s)| !(t > s)) {
            return param_err("each T_k must exceed S_{k-1}");
        }
        let mut sorted_t = t_values.clone();
        sorted_t.sort_by(f64::total_cmp);
        Ok(PrwPath {
            s_values,
            t_values,
            sorted_t,
        })
    }

    /// Simulate steps until `S_K > horizon`.
    pub fn simulate<R: Rng + ?Sized>(law: &StepLaw, horizon: f64, rng: &mut R) -> Result<Self> {
        law.validate()?;
        if !(horizon.is_finite()) {
            return param_err("horizon must be finite");
        }
        let mut s_values = vec![0.0];
        let mut t_values = Vec::new();
        let mut s = 0.0;
        while s <= horizon {
            let (xi, eta) = law.draw(rng);
            t_values.push(s + eta);
            s += xi;
            s_values.push(s);
        }
        let mut sorted_t = t_values.clone();
        sorted_t.sort_by(f64::total_cmp);
        Ok(PrwPath {
            s_values,
            t_values,
            sorted_t,
        })
    }

    /// The walk `(S_k, T_k)` encoded by a sieve environment:
    /// `S_k = -log V_k` and `T_k = -log p*_k`.
    pub fn from_environment(env: &SieveEnvironment) -> Self {
        let s_values: Vec<f64> = (0..=env.len()).map(|k| env.log_cutpoint(k)).collect();
        let t_values: Vec<f64> = (1..=env.len()).map(|k| env.neg_log_box_prob(k)).collect();
        let mut sorted_t = t_values.clone();
        sorted_t.sort_by(f64::total_cmp);
        PrwPath {
            s_values,
            t_values,
            sorted_t,
        }
    }

    pub fn s_values(&self) -> &[f64] {
        &self.s_values
    }

    pub fn t_values(&self) -> &[f64] {
        &self.t_values
    }

    /// `T_k` in ascending order.
    pub fn sorted_t_values(&self) -> &[f64] {
        &self.sorted_t
    }

    pub fn horizon(&self) -> f64 {
        *self.s_values.last().unwrap()
    }

    fn check(&self, x: f64) -> Result<()> {
        if x >= self.horizon() {
            return Err(SieveError::Range(format!(
                "x = {x} beyond simulated horizon {}",
                self.horizon()
            )));
        }
        Ok(())
    }

    /// `N(x) = #{k : T_k ≤ x}`
    pub fn visits(&self, x: f64) -> Result<u64> {
        self.check(x)?;
        Ok(self.sorted_t.partition_point(|&t| t <= x) as u64)
    }

    /// `N(x-) = #{k : T_k < x}`
    pub fn visits_left(&self, x: f64) -> Result<u64> {
        self.check(x)?;
        Ok(self.sorted_t.partition_point(|&t| t < x) as u64)
    }

    /// `ν(t) = #{k ≥ 0 : S_k ≤ t}`, zero for `t < 0`.
    pub fn renewals(&self, t: f64) -> Result<u64> {
        if t < 0.0 {
            return Ok(0);
        }
        self.check(t)?;
        Ok(self.s_values.partition_point(|&s| s <= t) as u64)
    }
}
