//! Simulation of the Bernoulli sieve, Karlin occupancy schemes, perturbed
//! random walks and Ewens permutations, with Monte Carlo checks of their
//! functional limit theorems.

pub mod error;
pub mod harness;
pub mod ewens;
pub mod limits;
pub mod occupancy;
pub mod prw;
pub mod quad;
pub mod rng;
pub mod sampling;
pub mod selftest;
pub mod special;
pub mod stats;
pub mod steps;

pub use error::{Result, SieveError};
pub use rng::RngStream;
