//! Kolmogorov–Smirnov distances and the thresholds used by the battery.

use super::KernelError;

/// Asymptotic 1% quantile of the Kolmogorov distribution.
pub const KS_Q99: f64 = 1.63;

/// Threshold multiplier for comparisons that involve Euler or lattice bias.
pub const DISCRETIZATION_ALLOWANCE: f64 = 1.5;

pub fn ks_threshold_one(n: usize) -> f64 {
    KS_Q99 / (n as f64).sqrt()
}

pub fn ks_threshold_two(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    KS_Q99 * ((n + m) / (n * m)).sqrt()
}

/// `sup_x |F_n(x) - F(x)|`; atoms in `cdf` are handled through left limits.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64, KernelError> {
    if samples.is_empty() {
        return Err(KernelError::EmptySample);
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0_f64;
    let mut i = 0;
    while i < xs.len() {
        let mut j = i;
        while j + 1 < xs.len() && xs[j + 1] == xs[i] {
            j += 1;
        }
        let f = cdf(xs[i]);
        let f_left = cdf(xs[i].next_down());
        d = d.max((f_left - i as f64 / n).abs()).max(((j + 1) as f64 / n - f).abs());
        i = j + 1;
    }
    Ok(d)
}

/// Two-sample distance; tied values are consumed together on both sides.
pub fn ks_two_sample(s1: &[f64], s2: &[f64]) -> Result<f64, KernelError> {
    if s1.is_empty() || s2.is_empty() {
        return Err(KernelError::EmptySample);
    }
    let mut a = s1.to_vec();
    let mut b = s2.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0_f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}
