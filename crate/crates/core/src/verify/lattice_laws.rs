//! Exact laws of the total lattice population.
//!
//! Summed over a forest, individuals are born at rate `N` and die at rate
//! `N` per unit chain time, whatever the split into spindles; immigrant
//! clades add births at rate `1/2`. The total is therefore a critical
//! linear birth-death process (with immigration), whose marginals are
//! binomial mixtures of negative binomials.

use crate::kernels::{besq_cdf_exact, ln_gamma, KernelError};

/// Chain time elapsed over `y` levels at lattice size `n`.
pub fn chain_time(n: u32, y: f64) -> f64 {
    2.0 * n as f64 * y
}

fn ln_choose(a: f64, b: f64) -> f64 {
    ln_gamma(a + 1.0) - ln_gamma(b + 1.0) - ln_gamma(a - b + 1.0)
}

/// `P(N_t = k)` for `k < kmax`, started from `n0` individuals.
pub fn critical_bd_pmf(n0: u32, t: f64, kmax: usize) -> Vec<f64> {
    let p = 1.0 / (1.0 + t);
    let (lp, lq) = (p.ln(), (t / (1.0 + t)).ln());
    let n0f = n0 as f64;
    let mut pmf = vec![0.0; kmax];
    if kmax == 0 {
        return pmf;
    }
    pmf[0] = (n0f * lq).exp();
    // b surviving lines, each of geometric size on {1, 2, ...}.
    for b in 1..=n0 {
        let bf = b as f64;
        let lw = ln_choose(n0f, bf) + bf * lp + (n0f - bf) * lq;
        for (k, slot) in pmf.iter_mut().enumerate().skip(b as usize) {
            let kf = k as f64;
            *slot += (lw + ln_choose(kf - 1.0, bf - 1.0) + bf * lp + (kf - bf) * lq).exp();
        }
    }
    pmf
}

/// Descendants of immigrants arriving at rate `1/2` from an empty start.
pub fn immigration_pmf(t: f64, kmax: usize) -> Vec<f64> {
    let p = 1.0 / (1.0 + t);
    let (lp, lq) = (p.ln(), (t / (1.0 + t)).ln());
    (0..kmax)
        .map(|k| {
            let kf = k as f64;
            (ln_gamma(kf + 0.5) - ln_gamma(0.5) - ln_gamma(kf + 1.0) + 0.5 * lp + kf * lq).exp()
        })
        .collect()
}

pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let k = a.len().min(b.len());
    (0..k).map(|i| (0..=i).map(|j| a[j] * b[i - j]).sum()).collect()
}

/// Law of the total population at level `y`: clades from `n0` individuals,
/// plus immigration when `immigration` is set.
pub fn total_pop_pmf(n0: u32, n: u32, y: f64, immigration: bool, kmax: usize) -> Vec<f64> {
    let t = chain_time(n, y);
    let base = critical_bd_pmf(n0, t, kmax);
    if immigration {
        convolve(&base, &immigration_pmf(t, kmax))
    } else {
        base
    }
}

/// Sup distance between the law of the total mass at level `y`, read as
/// `(N - U)/n` on `{N >= 1}` with `U` uniform, and the `BESQ(dim)`
/// marginal from `n0 / n`, where `dim` is 1 with immigration and 0
/// without. The sup is taken over four points per lattice cell.
pub fn lattice_besq_distance(n0: u32, n: u32, y: f64, immigration: bool) -> Result<f64, KernelError> {
    let x0 = n0 as f64 / n as f64;
    let dim = if immigration { 1.0 } else { 0.0 };
    // Far enough into the exponential tail of either marginal.
    let zmax = x0 + 40.0 * y + 20.0 * (x0 * y).sqrt();
    let kmax = (zmax * n as f64).ceil() as usize + 2;
    let pmf = total_pop_pmf(n0, n, y, immigration, kmax);
    let mut sup = 0.0_f64;
    let mut cum = 0.0;
    for k in 0..kmax - 1 {
        cum += pmf[k];
        for s in 0..4 {
            let frac = s as f64 / 4.0;
            let z = (k as f64 + frac) / n as f64;
            let fd = cum + pmf[k + 1] * frac;
            sup = sup.max((fd - besq_cdf_exact(x0, dim, y, z)?).abs());
        }
    }
    Ok(sup)
}
