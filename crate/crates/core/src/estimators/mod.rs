//! State estimators fed by measurement records: plain and variance-weighted
//! least squares, and a particle-filter Bayesian mean.

pub mod least_squares;
pub mod particle;

pub use least_squares::{
    build_design, hedged_frequency, lsf_estimate, lsf_theta, variance_weight, wlsf_estimate,
    wlsf_theta, DesignSystem, HEDGE_BETA,
};
pub use particle::{systematic_indices, ParticleCloud};
