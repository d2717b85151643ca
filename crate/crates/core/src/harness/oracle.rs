use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SieveError};
use crate::occupancy::{rho, SieveEnvironment};
use crate::prw::PrwPath;
use crate::rng::RngStream;

/// `ρ*(x)` and `N(log x)` evaluated on the same environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OraclePoint {
    pub log_x: f64,
    pub rho: u64,
    pub visits: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub points: Vec<OraclePoint>,
    pub mismatches: usize,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }
}

/// Compare the box counting function `ρ*(x) = #{k : p*_k ≥ 1/x}` with the
/// visit count `N(log x)` of the walk built from the same sticks, at
/// `points` values of `log x` drawn uniformly below 90% of the resolved depth.
pub fn connection_oracle(env: &SieveEnvironment, points: usize, seed: u64) -> Result<OracleReport> {
    if env.is_empty() {
        return Err(SieveError::Range("environment has no sticks".into()));
    }
    let path = PrwPath::from_environment(env);
    let depth = 0.9 * path.horizon().min(-env.unresolved_mass().ln());
    let mut rng = RngStream::new(seed, 0);
    let mut out = Vec::with_capacity(points);
    for _ in 0..points {
        let log_x = depth * (1.0 - rng.random::<f64>());
        out.push(OraclePoint {
            log_x,
            rho: rho(env, log_x.exp())?,
            visits: path.visits(log_x)?,
        });
    }
    let mismatches = out.iter().filter(|p| p.rho != p.visits).count();
    Ok(OracleReport {
        points: out,
        mismatches,
    })
}
