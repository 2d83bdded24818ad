//! Seeded samplers, squared Bessel paths, special functions and
//! Kolmogorov–Smirnov statistics.

mod besq;
mod ks;
mod samplers;
mod special;

pub use besq::{
    besq_additivity_compose, besq_cdf_exact, besq_marginal_exact, sample_besq_path, BesqPath, DEFAULT_DT,
};
pub use ks::{
    ks_statistic, ks_threshold_one, ks_threshold_two, ks_two_sample, DISCRETIZATION_ALLOWANCE, KS_Q99,
};
pub use samplers::{
    besq_m1_lifetime_cdf, overshoot_from_uniform, sample_besq_m1_lifetime, sample_beta, sample_dirichlet_half,
    sample_gamma, sample_overshoot_ratio, sample_pdip, sample_poisson,
};
pub use special::{beta_cdf, gamma_cdf, ln_gamma, poisson_pmf};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported BESQ dimension {0}")]
    UnsupportedDim(f64),
    #[error("empty sample")]
    EmptySample,
}
