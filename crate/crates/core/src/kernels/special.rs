//! CDF evaluators backed by the regularized incomplete gamma and beta
//! functions of `statrs`.

use statrs::function::{beta, gamma};

/// `P(G <= x)` for `G ~ Gamma(shape, rate)`.
pub fn gamma_cdf(shape: f64, rate: f64, x: f64) -> f64 {
    assert!(shape > 0.0 && rate > 0.0, "gamma_cdf needs positive shape and rate");
    if x <= 0.0 {
        return 0.0;
    }
    if !x.is_finite() {
        return 1.0;
    }
    gamma::gamma_lr(shape, rate * x)
}

/// `P(B <= x)` for `B ~ Beta(a, b)`.
pub fn beta_cdf(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "beta_cdf needs positive parameters");
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        beta::beta_reg(a, b, x)
    }
}

pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

pub fn poisson_pmf(k: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * lambda.ln() - lambda - ln_gamma(k as f64 + 1.0)).exp()
}
