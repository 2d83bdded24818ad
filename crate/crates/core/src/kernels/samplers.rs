use std::f64::consts::PI;

use rand_distr::{Beta, Distribution, Gamma, Poisson};

use super::special::gamma_cdf;
use super::KernelError;
use crate::chains::ocrp_sample;
use crate::ip::IntervalPartition;
use crate::rng::RngStream;

pub fn sample_gamma(shape: f64, rate: f64, rng: &mut RngStream) -> Result<f64, KernelError> {
    if !(shape > 0.0 && rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
        return Err(KernelError::InvalidParameter(format!("Gamma({shape}, {rate})")));
    }
    let g = Gamma::new(shape, 1.0 / rate).map_err(|e| KernelError::InvalidParameter(e.to_string()))?;
    Ok(g.sample(rng))
}

pub fn sample_beta(a: f64, b: f64, rng: &mut RngStream) -> Result<f64, KernelError> {
    if !(a > 0.0 && b > 0.0) {
        return Err(KernelError::InvalidParameter(format!("Beta({a}, {b})")));
    }
    let d = Beta::new(a, b).map_err(|e| KernelError::InvalidParameter(e.to_string()))?;
    Ok(d.sample(rng))
}

pub fn sample_poisson(lambda: f64, rng: &mut RngStream) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("finite positive Poisson mean").sample(rng) as u64
}

/// `Dir(1/2, 1/2, 1/2)` via three normalized `Gamma(1/2, 1)` draws.
pub fn sample_dirichlet_half(rng: &mut RngStream) -> (f64, f64, f64) {
    loop {
        let g: [f64; 3] = std::array::from_fn(|_| sample_gamma(0.5, 1.0, rng).expect("valid"));
        let s = g[0] + g[1] + g[2];
        if s > 0.0 {
            let (a, b) = (g[0] / s, g[1] / s);
            return (a, b, 1.0 - a - b);
        }
    }
}

/// Lifetime of `BESQ_a(-1)`: `a / (2G)` with `G ~ Gamma(3/2, 1)`.
pub fn sample_besq_m1_lifetime(a: f64, rng: &mut RngStream) -> f64 {
    assert!(a >= 0.0, "initial value must be nonnegative");
    if a == 0.0 {
        return 0.0;
    }
    a / (2.0 * sample_gamma(1.5, 1.0, rng).expect("valid"))
}

/// CDF of `a / (2G)`, `G ~ Gamma(3/2, 1)`.
pub fn besq_m1_lifetime_cdf(a: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return if a == 0.0 { 1.0 } else { 0.0 };
    }
    if a == 0.0 {
        return 1.0;
    }
    1.0 - gamma_cdf(1.5, 1.0, a / (2.0 * t))
}

/// Inverse CDF of the ratio `T - 1` where `P(T < t) = (2/π) arctan(t - 1)`.
pub fn overshoot_from_uniform(u: f64) -> f64 {
    (PI * u / 2.0).tan()
}

pub fn sample_overshoot_ratio(rng: &mut RngStream) -> f64 {
    overshoot_from_uniform(rng.uniform_open())
}

/// Unit-mass `PDIP(1/2, theta2)` approximated by an ordered CRP with
/// `n_approx` customers, annotated at `h = 10 / n_approx`.
pub fn sample_pdip(theta2: f64, n_approx: usize, rng: &mut RngStream) -> Result<IntervalPartition, KernelError> {
    if theta2 != 0.0 && theta2 != 0.5 {
        return Err(KernelError::InvalidParameter(format!("theta2 = {theta2}, expected 0 or 1/2")));
    }
    if n_approx == 0 {
        return Err(KernelError::InvalidParameter("n_approx must be at least 1".into()));
    }
    let tables = ocrp_sample(theta2, n_approx, rng);
    let n = n_approx as f64;
    let masses = tables.into_iter().map(|m| m as f64 / n).collect();
    Ok(IntervalPartition::from_masses_unchecked(masses).annotate(10.0 / n))
}
