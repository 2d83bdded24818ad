//! Squared Bessel paths.
//!
//! Nonnegative dimensions use the exact Poisson-mixture transition
//! `X_{t+h} = 2h Gamma(N + δ/2, 1)` with `N ~ Poisson(X_t / 2h)`. Negative
//! dimensions use Euler–Maruyama with absorption at the first nonpositive
//! step and step halving while `X < 10 h`.

use serde::{Deserialize, Serialize};

use super::samplers::{sample_gamma, sample_poisson};
use super::special::{gamma_cdf, poisson_pmf};
use super::KernelError;
use crate::rng::RngStream;

pub const DEFAULT_DT: f64 = 1e-3;

/// Finest Euler step relative to the nominal `dt`.
const MIN_STEP_FRACTION: f64 = 1.0 / 65_536.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesqPath {
    pub x0: f64,
    pub dim: f64,
    pub dt: f64,
    /// Increasing sample levels, starting at 0.
    pub levels: Vec<f64>,
    pub values: Vec<f64>,
    /// Absorption level; `f64::INFINITY` when not absorbed by the horizon.
    pub lifetime: f64,
}

impl BesqPath {
    fn zero(dim: f64, dt: f64) -> Self {
        Self { x0: 0.0, dim, dt, levels: vec![0.0], values: vec![0.0], lifetime: 0.0 }
    }

    pub fn horizon(&self) -> f64 {
        *self.levels.last().expect("nonempty path")
    }

    /// Linear interpolation on the sample grid; 0 at and after absorption.
    pub fn value_at(&self, y: f64) -> f64 {
        if y < 0.0 || y >= self.lifetime {
            return 0.0;
        }
        let k = self.levels.partition_point(|&l| l <= y);
        if k == 0 {
            return self.values[0];
        }
        if k == self.levels.len() {
            return *self.values.last().expect("nonempty path");
        }
        let (l0, l1) = (self.levels[k - 1], self.levels[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        v0 + (v1 - v0) * (y - l0) / (l1 - l0)
    }
}

fn exact_step(x: f64, dim: f64, h: f64, rng: &mut RngStream) -> f64 {
    let n = sample_poisson(x / (2.0 * h), rng) as f64;
    let shape = n + dim / 2.0;
    if shape <= 0.0 {
        0.0
    } else {
        2.0 * h * sample_gamma(shape, 1.0, rng).expect("positive shape")
    }
}

/// Sample a path on `[0, horizon]` (or until absorption for `dim <= 0`).
pub fn sample_besq_path(x0: f64, dim: f64, dt: f64, horizon: f64, rng: &mut RngStream) -> Result<BesqPath, KernelError> {
    if !(x0 >= 0.0) || !(dt > 0.0) || !(horizon >= 0.0) {
        return Err(KernelError::InvalidParameter(format!("x0={x0}, dt={dt}, horizon={horizon}")));
    }
    if !dim.is_finite() {
        return Err(KernelError::UnsupportedDim(dim));
    }
    if x0 == 0.0 && dim <= 0.0 {
        return Ok(BesqPath::zero(dim, dt));
    }
    if dim >= 0.0 {
        Ok(exact_path(x0, dim, dt, horizon, rng))
    } else {
        Ok(euler_path(x0, dim, dt, horizon, rng))
    }
}

fn exact_path(x0: f64, dim: f64, dt: f64, horizon: f64, rng: &mut RngStream) -> BesqPath {
    let steps = (horizon / dt).ceil() as usize;
    let mut levels = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    levels.push(0.0);
    values.push(x0);
    let mut x = x0;
    let mut lifetime = f64::INFINITY;
    for k in 1..=steps {
        let y0 = (k - 1) as f64 * dt;
        let h = (k as f64 * dt).min(horizon) - y0;
        let next = exact_step(x, dim, h, rng);
        if dim == 0.0 && next == 0.0 {
            // Absorption inside the step: P(T - y0 <= s | T - y0 <= h) = exp(x/2h - x/2s).
            let s = x / (x / h + 2.0 * rng.exp1());
            lifetime = y0 + s;
            levels.push(lifetime);
            values.push(0.0);
            break;
        }
        x = next;
        levels.push(y0 + h);
        values.push(x);
    }
    BesqPath { x0, dim, dt, levels, values, lifetime }
}

fn euler_path(x0: f64, dim: f64, dt: f64, horizon: f64, rng: &mut RngStream) -> BesqPath {
    let mut levels = vec![0.0];
    let mut values = vec![x0];
    let mut x = x0;
    let mut y = 0.0;
    let h_min = dt * MIN_STEP_FRACTION;
    let drift = dim;
    loop {
        if y >= horizon {
            return BesqPath { x0, dim, dt, levels, values, lifetime: f64::INFINITY };
        }
        let mut h = dt.min(horizon - y);
        while x < 10.0 * h && h > h_min {
            h *= 0.5;
        }
        let next = x + drift * h + 2.0 * (x * h).sqrt() * rng.normal();
        if next <= 0.0 {
            let zeta = y + h * x / (x - next);
            levels.push(zeta);
            values.push(0.0);
            return BesqPath { x0, dim, dt, levels, values, lifetime: zeta };
        }
        x = next;
        y += h;
        levels.push(y);
        values.push(x);
    }
}

/// Exact draw of `X_y` from `X_0 = x0` for `dim >= 0`.
pub fn besq_marginal_exact(x0: f64, dim: f64, y: f64, rng: &mut RngStream) -> Result<f64, KernelError> {
    if dim < 0.0 {
        return Err(KernelError::UnsupportedDim(dim));
    }
    if y == 0.0 {
        return Ok(x0);
    }
    Ok(exact_step(x0, dim, y, rng))
}

/// `P(X_y <= z)` from `X_0 = x0`, `dim >= 0`, as a Poisson mixture of Gamma CDFs.
pub fn besq_cdf_exact(x0: f64, dim: f64, y: f64, z: f64) -> Result<f64, KernelError> {
    if dim < 0.0 {
        return Err(KernelError::UnsupportedDim(dim));
    }
    if z < 0.0 {
        return Ok(0.0);
    }
    let lambda = x0 / (2.0 * y);
    let rate = 1.0 / (2.0 * y);
    let kmax = (lambda + 12.0 * lambda.sqrt() + 40.0) as u64;
    let mut total = 0.0;
    for k in 0..=kmax {
        let w = poisson_pmf(k, lambda);
        let shape = k as f64 + dim / 2.0;
        total += if shape <= 0.0 { w } else { w * gamma_cdf(shape, rate, z) };
    }
    Ok(total.min(1.0))
}

/// `X ~ BESQ_a(-1)` and `W ~ BESQ_b(0)` summed up to `τ`, the first time
/// either is absorbed, then continued as `V_τ Z(s / V_τ)` with
/// `Z ~ BESQ_1(-1)`.
pub fn besq_additivity_compose(a: f64, b: f64, dt: f64, rng: &mut RngStream) -> Result<BesqPath, KernelError> {
    if !(a >= 0.0 && b >= 0.0 && dt > 0.0) {
        return Err(KernelError::InvalidParameter(format!("a={a}, b={b}, dt={dt}")));
    }
    let dim = -1.0;
    if a == 0.0 && b == 0.0 {
        return Ok(BesqPath::zero(dim, dt));
    }
    let mut levels = vec![0.0];
    let mut values = vec![a + b];
    let (mut x, mut w, mut y) = (a, b, 0.0);
    let h_min = dt * MIN_STEP_FRACTION;
    // Joint phase.
    let v_tau = loop {
        if x == 0.0 || w == 0.0 {
            break x + w;
        }
        let mut h = dt;
        while x < 10.0 * h && h > h_min {
            h *= 0.5;
        }
        let x_next = x - h + 2.0 * (x * h).sqrt() * rng.normal();
        let w_next = exact_step(w, 0.0, h, rng);
        let s_x = (x_next <= 0.0).then(|| h * x / (x - x_next));
        let s_w = (w_next == 0.0).then(|| w / (w / h + 2.0 * rng.exp1()));
        match (s_x, s_w) {
            (None, None) => {
                x = x_next;
                w = w_next;
                y += h;
            }
            (Some(sx), sw) if sw.is_none_or(|sw| sx <= sw) => {
                // X hits 0 first; W is interpolated to the hitting time.
                let frac = sx / h;
                w = (w + (w_next - w) * frac).max(0.0);
                x = 0.0;
                y += sx;
            }
            (_, Some(sw)) => {
                let frac = sw / h;
                x = (x + (x_next.max(0.0) - x) * frac).max(0.0);
                w = 0.0;
                y += sw;
            }
            _ => unreachable!(),
        }
        levels.push(y);
        values.push(x + w);
    };
    if v_tau <= 0.0 {
        return Ok(BesqPath { x0: a + b, dim, dt, lifetime: y, levels, values });
    }
    // Scaled BESQ_1(-1) continuation, on a grid that matches dt after scaling.
    let z = euler_path(1.0, dim, dt / v_tau, f64::INFINITY, rng);
    let tau = y;
    for (l, v) in z.levels.iter().zip(&z.values).skip(1) {
        levels.push(tau + v_tau * l);
        values.push(v_tau * v);
    }
    Ok(BesqPath { x0: a + b, dim, dt, lifetime: tau + v_tau * z.lifetime, levels, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absorbed_start() {
        let mut r = RngStream::new(1, 0);
        let p = sample_besq_path(0.0, -1.0, 1e-3, 1.0, &mut r).unwrap();
        assert_eq!(p.lifetime, 0.0);
        assert!(p.values.iter().all(|&v| v == 0.0));
        assert_eq!(p.value_at(0.5), 0.0);
    }

    #[test]
    fn invalid_inputs() {
        let mut r = RngStream::new(1, 0);
        assert!(sample_besq_path(-1.0, 0.0, 1e-3, 1.0, &mut r).is_err());
        assert!(sample_besq_path(1.0, f64::NAN, 1e-3, 1.0, &mut r).is_err());
        assert!(besq_cdf_exact(1.0, -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn path_invariants() {
        let mut r = RngStream::new(2, 0);
        for &dim in &[-1.0, 0.0, 1.0, 4.0] {
            for _ in 0..50 {
                let p = sample_besq_path(0.7, dim, 1e-2, 2.0, &mut r).unwrap();
                assert_eq!(p.values[0], 0.7);
                assert!(p.values.iter().all(|&v| v >= 0.0));
                assert!(p.levels.windows(2).all(|w| w[0] < w[1]));
                if p.lifetime.is_finite() {
                    assert_eq!(*p.values.last().unwrap(), 0.0);
                    assert_eq!(p.value_at(p.lifetime + 0.1), 0.0);
                }
                if dim > 0.0 {
                    assert!(p.lifetime.is_infinite());
                }
            }
        }
    }

    #[test]
    fn besq0_martingale() {
        let mut r = RngStream::new(3, 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| besq_marginal_exact(1.0, 0.0, 1.0, &mut r).unwrap()).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        // Var X_1 = 4 x0 y = 4.
        assert!((m - 1.0).abs() < 3.0 * (4.0f64 / n as f64).sqrt());
    }

    #[test]
    fn exact_cdf_oracles() {
        // BESQ_x(0): atom exp(-x/2y) at 0.
        let p0 = besq_cdf_exact(1.0, 0.0, 0.5, 0.0).unwrap();
        assert!((p0 - (-1.0f64).exp()).abs() < 1e-12);
        // BESQ_0(1) at y is y χ²₁: P(X <= z) = erf(√(z/2y)).
        let (y, z) = (0.5f64, 0.3f64);
        let c = besq_cdf_exact(0.0, 1.0, y, z).unwrap();
        assert!((c - gamma_cdf(0.5, 1.0, z / (2.0 * y))).abs() < 1e-12);
        assert!((besq_cdf_exact(2.0, 1.0, 0.5, 1e6).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn path_marginal_matches_exact_cdf() {
        let mut r = RngStream::new(4, 0);
        let n = 20_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                let p = sample_besq_path(1.0, 1.0, 0.05, 0.5, &mut r).unwrap();
                p.value_at(0.5)
            })
            .collect();
        let d = super::super::ks_statistic(&xs, |z| besq_cdf_exact(1.0, 1.0, 0.5, z).unwrap()).unwrap();
        assert!(d < super::super::ks_threshold_one(n), "ks {d}");
    }

    #[test]
    fn euler_survival_mean_against_refined_grid() {
        // E[X(y); y < ζ] for BESQ_1(-1) at y = 0.5, against the same scheme at dt/10.
        let n = 20_000;
        let run = |dt: f64, seed: u64| {
            let mut r = RngStream::new(seed, 0);
            let xs: Vec<f64> = (0..n)
                .map(|_| sample_besq_path(1.0, -1.0, dt, 0.5, &mut r).unwrap().value_at(0.5))
                .collect();
            let m = xs.iter().sum::<f64>() / n as f64;
            let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
            (m, v)
        };
        let (m1, v1) = run(1e-3, 5);
        let (m2, v2) = run(1e-4, 6);
        let se = ((v1 + v2) / n as f64).sqrt();
        assert!((m1 - m2).abs() < 3.0 * se + 0.005, "{m1} vs {m2}");
        // Drift -1 until absorption: E[X(y)] = 1 - E[min(y, ζ)] exactly.
    }

    #[test]
    fn euler_lifetime_mean() {
        let mut r = RngStream::new(7, 0);
        let n = 20_000;
        let mut trunc = 0.0;
        let mut trunc_exact = 0.0;
        for _ in 0..n {
            let p = sample_besq_path(1.0, -1.0, 1e-3, f64::INFINITY, &mut r).unwrap();
            trunc += p.lifetime.min(3.0);
            trunc_exact += super::super::sample_besq_m1_lifetime(1.0, &mut r).min(3.0);
        }
        let (a, b) = (trunc / n as f64, trunc_exact / n as f64);
        assert!((a - b).abs() < 0.03, "{a} vs {b}");
    }

    #[test]
    fn composition_degenerate_and_continuous() {
        let mut r = RngStream::new(8, 0);
        let z = besq_additivity_compose(0.0, 0.0, 1e-3, &mut r).unwrap();
        assert_eq!(z.lifetime, 0.0);
        for _ in 0..100 {
            let p = besq_additivity_compose(1.0, 1.0, 1e-3, &mut r).unwrap();
            assert_eq!(p.values[0], 2.0);
            assert!(p.lifetime.is_finite());
            assert!(p.levels.windows(2).all(|w| w[0] <= w[1]));
            assert!(p.values.iter().all(|&v| v >= 0.0));
            assert_eq!(*p.values.last().unwrap(), 0.0);
        }
    }

    #[test]
    fn scaling_of_besq_m1() {
        // c X(y/c) from X_0 = x has the law of BESQ_{cx}(-1) at y.
        let n = 10_000;
        let (c, y) = (2.0, 0.4);
        let mut r = RngStream::new(9, 0);
        let scaled: Vec<f64> = (0..n)
            .map(|_| c * sample_besq_path(0.5, -1.0, 1e-3, y / c, &mut r).unwrap().value_at(y / c))
            .collect();
        let direct: Vec<f64> = (0..n)
            .map(|_| sample_besq_path(1.0, -1.0, 1e-3, y, &mut r).unwrap().value_at(y))
            .collect();
        let d = super::super::ks_two_sample(&scaled, &direct).unwrap();
        assert!(d < 1.5 * super::super::ks_threshold_two(n, n), "ks {d}");
    }
}
