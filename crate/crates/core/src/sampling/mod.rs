//! Random variate generation for every law the simulations need.
//!
//! All samplers take the generator explicitly and hold no state, so replicate
//! workers can call them concurrently on their own [`RngStream`]s.
//!
//! [`RngStream`]: crate::rng::RngStream

mod binomial;
mod stable;
mod stick;

pub use binomial::{binomial_regime, sample_binomial, sample_binomial_tracked, BinomialRegime};
pub use stable::{
    positive_stable_scale, sample_brownian_marginals, sample_inverse_subordinator_marginal,
    sample_inverse_subordinator_path, sample_positive_stable, sample_spectrally_negative_stable,
    sample_stable_cms, sample_standard_positive_stable, spectrally_negative_cf,
    spectrally_negative_scale, subordinator_passages, PassageQuery,
};
pub use stick::{sample_stick, Stick, StickLaw};
