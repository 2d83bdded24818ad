use std::fmt::Display;
use std::sync::Arc;

use rayon::prelude::*;

use super::lattice_laws::lattice_besq_distance;
use super::samples::{dequantize, killed_sample, path_rng, two_tree_sample, Masses, PseudoSample};
use super::{Battery, Outcome, Params, Source, VerifyError};
use crate::chains::{aldous_transition_matrix, lumpability_check};
use crate::ip::{Block, IntervalPartition};
use crate::kernels::{
    besq_additivity_compose, besq_cdf_exact, besq_m1_lifetime_cdf, beta_cdf, gamma_cdf, ks_statistic, ks_threshold_one,
    ks_threshold_two, ks_two_sample, sample_besq_m1_lifetime, sample_besq_path, sample_gamma, sample_overshoot_ratio,
    DEFAULT_DT, DISCRETIZATION_ALLOWANCE,
};
use crate::metric::{d_ip, d_ip_enumerate};
use crate::rng::RngStream;
use crate::scaffolding::{sample_type0_data, sample_type1_measure};
use crate::type2::{Construction, Type2Config};

const DRAWS_PER_STREAM: usize = 10_000;

fn sim(e: impl Display) -> VerifyError {
    VerifyError::Simulation(e.to_string())
}

fn one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64, loosened: bool) -> Result<Outcome, VerifyError> {
    let d = ks_statistic(samples, cdf).map_err(sim)?;
    let f = if loosened { DISCRETIZATION_ALLOWANCE } else { 1.0 };
    Ok(Outcome::ks(d, samples.len(), Source::ClosedForm, f * ks_threshold_one(samples.len())))
}

fn two_sample(a: &[f64], b: &[f64], loosened: bool) -> Result<Outcome, VerifyError> {
    let d = ks_two_sample(a, b).map_err(sim)?;
    let f = if loosened { DISCRETIZATION_ALLOWANCE } else { 1.0 };
    Ok(Outcome::ks(d, a.len(), Source::Simulated, f * ks_threshold_two(a.len(), b.len())).against(b.len()))
}

/// `base` at `at` samples, widened like `1/√n` below that.
fn scaled_tolerance(base: f64, at: usize, n: usize) -> f64 {
    base * (at as f64 / n.max(1) as f64).sqrt().max(1.0)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn parse_construction(p: &Params, key: &str) -> Result<Construction, VerifyError> {
    p.str_or(key, "clocking").parse().map_err(VerifyError::BadParam)
}

fn parse_coord(p: &Params) -> Result<usize, VerifyError> {
    match p.str_or("coord", "m1") {
        "m1" | "x1" | "1" => Ok(1),
        "m2" | "x2" | "2" => Ok(2),
        "alpha" | "x3" | "3" => Ok(3),
        other => Err(VerifyError::BadParam(format!("coord={other}"))),
    }
}

/// Parallel draws, `DRAWS_PER_STREAM` per stream, in stream order.
fn draws(seed: u64, tag: u64, n: usize, f: impl Fn(&mut RngStream) -> f64 + Sync) -> Vec<f64> {
    (0..n.div_ceil(DRAWS_PER_STREAM))
        .into_par_iter()
        .flat_map_iter(|j| {
            let mut rng = path_rng(seed, tag, j);
            let len = DRAWS_PER_STREAM.min(n - j * DRAWS_PER_STREAM);
            (0..len).map(|_| f(&mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

fn random_annotated(max_blocks: usize, rng: &mut RngStream) -> IntervalPartition {
    let k = rng.below(max_blocks + 1);
    let mut d = 0.0;
    let blocks = (0..k)
        .map(|_| {
            d += 0.5 * rng.uniform();
            Block { mass: 0.01 + 0.99 * rng.uniform(), div_left: Some(d) }
        })
        .collect();
    IntervalPartition::new(blocks, Some(d + 0.5 * rng.uniform())).expect("valid by construction")
}

impl Battery {
    pub(super) fn dispatch(&self, name: &str, n_paths: usize, p: &Params) -> Result<Outcome, VerifyError> {
        match name {
            "total_mass_besq" => self.total_mass_besq(n_paths, p),
            "degeneration_prob" => self.degeneration_prob(n_paths, p),
            "survivor_label" => self.survivor_label(n_paths, p),
            "degeneration_mass" => self.degeneration_mass(n_paths, p),
            "pseudo_stationary_ratio" => self.pseudo_stationary(n_paths, p, true),
            "pseudo_stationary_top" => self.pseudo_stationary(n_paths, p, false),
            "two_tree_stationary" => self.two_tree(n_paths, p, false),
            "two_tree_mean" => self.two_tree(n_paths, p, true),
            "killed_wf" => self.killed_wf(n_paths, p),
            "overshoot_log_mean" => self.overshoot(n_paths, false),
            "overshoot_median" => self.overshoot(n_paths, true),
            "clock_level_exact" => self.clock_level(n_paths, p, false),
            "clock_level_euler" => self.clock_level(n_paths, p, true),
            "type1_total_mass" => self.scaffolding_mass(n_paths, p, false),
            "type0_total_mass" => self.scaffolding_mass(n_paths, p, true),
            "scaffolding_bias" => scaffolding_bias(p),
            "besq_additivity" => self.besq_additivity(n_paths, p),
            "d_metric_oracle" => self.metric_oracle(n_paths, p),
            "metric_axioms" => self.metric_axioms(n_paths, p),
            "aldous_uniform" => Ok(aldous_uniform()),
            "two_tree_lumpability" => two_tree_lumpability(p),
            "cross_construction" => self.cross_construction(n_paths, p),
            _ => Err(VerifyError::UnknownTest(name.to_string())),
        }
    }

    /// Pseudo-stationary runs read at 0.25, 0.5, 1 and `y`.
    fn pseudo(&self, construction: Construction, n_paths: usize, p: &Params, y: f64) -> Result<(Arc<PseudoSample>, usize), VerifyError> {
        let n = p.u32_or("n", 128)?;
        let gamma = p.f64_or("gamma", 1.0)?;
        let dt = p.f64_or("dt", DEFAULT_DT)?;
        if !(y > 0.0) {
            return Err(VerifyError::BadParam(format!("y={y}")));
        }
        let mut levels = vec![0.25, 0.5, 1.0];
        if !levels.contains(&y) {
            levels.push(y);
            levels.sort_by(f64::total_cmp);
        }
        let horizon = levels.iter().copied().fold(0.0, f64::max);
        let cfg = Type2Config { n, dt, horizon, max_horizon: 16.0_f64.max(horizon) };
        let key = format!("pseudo:{}:{n_paths}:{n}:{gamma}:{dt}:{levels:?}", construction.name());
        let seed = self.seed;
        let s = self.memo(key, || PseudoSample::generate(construction, gamma, &cfg, &levels, n_paths, seed).map_err(sim))?;
        let k = s.level_index(y).expect("level requested");
        Ok((s, k))
    }

    fn total_mass_besq(&self, n_paths: usize, p: &Params) -> Result<Outcome, VerifyError> {
        let c = parse_construction(p, "construction")?;
        let y = p.f64_or("y", 0.25)?;
        let gamma = p.f64_or("gamma", 1.0)?;
        let dt = p.f64_or("dt", DEFAULT_DT)?;
        let (s, k) = self.pseudo(c, n_paths, p, y)?;
        let ours: Vec<f64> = s.resolved().map(|r| r.at[k].total()).collect();
        let seed = self.seed;
        let reference = self.memo(format!("besq_ref:{n_paths}:{gamma}:{dt}:{y}"), || {
            (0..n_paths)
                .into_par_iter()
                .map(|i| {
                    let mut rng = path_rng(seed, 0x4252, i);
                    let m0 = sample_gamma(1.5, gamma, &mut rng).map_err(sim)?;
                    Ok(sample_besq_path(m0, -1.0, dt, y, &mut rng).map_err(sim)?.value_at(y))
                })
                .collect::<Result<Vec<f64>, VerifyError>>()
        })?;
        two_sample(&ours, &reference, true)
    }

    fn degeneration_prob(&self, n_paths: usize, p: &Params) -> Result<Outcome, VerifyError> {
        let c = parse_construction(p, "construction")?;
        let y = p.f64_or("y", 0.5)?;
        let gamma = p.f64_or("gamma", 1.0)?;
        let (s, _) = self.pseudo(c, n_paths, p, y)?;
        let total = s.resolved().count();
        let alive = s.resolved().filter(|r| r.degeneration.is_none_or(|d| d.level > y)).count();
        let reference = (2.0 * y * gamma + 1.0).powi(-2);
        Ok(Outcome::close(alive as f64 / total as f64, total, reference, Source::ClosedForm, scaled_tolerance(0.02, 20_000, n_paths)))
    }

    fn survivor_label(&self, n_paths: usize, p: &Params) -> Result<Outcome, VerifyError> {
        let c = parse_construction(p, "construction")?;
        let (s, _) = self.pseudo(c, n_paths, p, 0.5)?;
        let labels: Vec<u8> = s.resolved().filter_map(|r| r.degeneration.map(|d| d.survivor)).collect();
        let ones = labels.iter().filter(|&&l| l == 1).count();
        let freq = ones as f64 / labels.len() as f64;
        Ok(Outcome::close(freq, labels.len(), 0.5, Source::ClosedForm, scaled_tolerance(0.015, 20_000, n_paths)))
    }

    /// Probability integral transform of `M_D` under `Gamma(1/2, γ/(2Dγ+1))`
    /// for `D` within `window` of `y`, tested for uniformity.
    fn degeneration_mass(&self, n_paths: usize, p: &Params) -> Result<Outcome, VerifyError> {
        let c = parse_construction(p, "construction")?;
        let y = p.f64_or("y", 0.5)?;
        let w = p.f64_or("window", 0.1)?;
        let gamma = p.f64_or("gamma", 1.0)?;
        let (s, _) = self.pseudo(c, n_paths, p, y)?;
        let pit: Vec<f64> = s
            .resolved()
            .filter_map(|r| r.degeneration)
            .filter(|d| (d.level - y).abs() <= w)
            .map(|d| gamma_cdf(0.5, gamma / (2.0 * d.level * gamma + 1.0), d.mass))
            .collect();
        one_sample(&pit, |u| u.clamp(0.0, 1.0), true)
    }

    fn pseudo_stationary(&self, n_paths: usize, p: &Params, ratio: bool) -> Result<Outcome, VerifyError> {
        let c = parse_construction(p, "construction")?;
        let y = p.f64_or("y", 0.5)?;
        let gamma = p.f64_or("gamma", 1.0)?;
        let (s, k) = self.pseudo(c, n_paths, p, y)?;
        let alive = s.resolved().filter(|r| r.degeneration.is_none_or(|d| d.level > y)).map(|r| r.at[k]);
        if ratio {
            let (xs, empty): (Vec<f64>, Vec<f64>) =
                alive.map(|m| if m.total() > 0.0 { m.m1 / m.total() } else { f64::NAN }).partition(|x| !x.is_nan());
            let out = one_sample(&xs, |x| beta_cdf(0.5, 1.0, x), true)?;
            Ok(if empty.is_empty() { out } else { out.with_detail(format!("{} empty states dropped", empty.len())) })
        } else {
            let xs: Vec<f64> = alive.map(|m| m.m1).collect();
            let rate = gamma / (2.0 * y * gamma + 1.0);
            one_sample(&xs, |x| gamma_cdf(0.5, rate, x), true)
        }
    }

    fn cross_construction(&self, n_paths: usize, p: &Params) -> Result<Outcome, VerifyError> {
        let a = parse_construction(p, "first")?;
        let b = parse_construction(p, "second")?;
        if a == b {
            return Err(VerifyError::BadParam("first and second constructions coincide".into()));
        }
        let coord = parse_coord(p)?;
        let y = p.f64_or("y", 0.5)?;
        let values = |c| -> Result<Vec<f64>, VerifyError> {
            let (s, k) = self.pseudo(c, n_paths, p, y)?;
            Ok(s.resolved().map(|r| r.at[k].get(coord)).collect())
        };
        two_sample(&values(a)?, &values(b)?, true)
    }

    fn two_tree(&self, n_paths: usize, p: &Params, means: bool) -> Result<Outcome, VerifyError> {
        let n = p.u32_or("n", 256)?;
        let dt = p.f64_or("dt", DEFAULT_DT)?;
        let u = p.f64_or("u", 8.0)?;
        let coord = parse_coord(p)?;
        let mut times = vec![2.0, 4.0, 8.0];
        if !times.contains(&u) {
            times.push(u);
            times.sort_by(f64::total_cmp);
        }
        let k = times.iter().position(|&t| t == u).expect("time requested");
        let cfg = Type2Config { n, dt, horizon: 1.0, max_horizon: 16.0 };
        let seed = self.seed;
        let s = self.memo(format!("twotree:{n_paths}:{n}:{dt}:{times:?}"), || two_tree_sample(&cfg, &times, n_paths, seed).map_err(sim))?;
        let xs: Vec<f64> = s.iter().map(|row: &Vec<Masses>| row[k].get(coord)).collect();
        if means {
            Ok(Outcome::close(mean(&xs), xs.len(), 1.0 / 3.0, Source::ClosedForm, scaled_tolerance(0.01, 10_000, xs.len())))
        } else {
            one_sample(&xs, |x| beta_cdf(0.5, 1.0, x), true)
        }
    }

    fn killed_wf(&self, n_paths: usize, p: &Params) -> Result<Outcome, VerifyError> {
        let n = p.u32_or("n", 128)?;
        let dt = p.f64_or("dt", DEFAULT_DT)?;
        let u = p.f64_or("u", 0.2)?;
        let coord = parse_coord(p)?;
        let x0 = (p.f64_or("x1", 0.4)?, p.f64_or("x2", 0.3)?, p.f64_or("x3", 0.3)?);
        let cfg = Type2Config { n, dt, horizon: 0.5, max_horizon: 16.0 };
        let seed = self.seed;
        let proj = self.memo(format!("killed:proj:{n_paths}:{n}:{dt}:{u}:{x0:?}"), || killed_sample(x0, u, Some(&cfg), dt, n_paths, seed).map_err(sim))?;
        let wf = self.memo(format!("killed:ref:{n_paths}:{dt}:{u}:{x0:?}"), || killed_sample(x0, u, None, dt, n_paths, seed).map_err(sim))?;
        let pick = |v: &[(f64, f64, f64)]| -> Vec<f64> { v.iter().map(|x| if coord == 1 { x.0 } else if coord == 2 { x.1 } else { x.2 }).collect() };
        let out = two_sample(&pick(&proj.0), &pick(&wf.0), true)?;
        let detail = format!("survival projected {:.4}, reference {:.4}", proj.0.len() as f64 / proj.1 as f64, wf.0.len() as f64 / wf.1 as f64);
        Ok(out.with_detail(detail))
    }

    fn overshoot(&self, n_paths: usize, median: bool) -> Result<Outcome, VerifyError> {
        let seed = self.seed;
        let r = self.memo(format!("overshoot:{n_paths}"), || Ok(draws(seed, 0x4f56, n_paths, sample_overshoot_ratio)))?;
        let n = r.len();
        let spread = std::f64::consts::FRAC_PI_2 / (n as f64).sqrt();
        if median {
            let mut v = r.to_vec();
            let mid = n / 2;
            let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
            Ok(Outcome::close(*m, n, 1.0, Source::ClosedForm, (3.0 * spread).max(0.01)))
        } else {
            let logs: Vec<f64> = r.iter().map(|x| x.ln()).collect();
            Ok(Outcome::close(mean(&logs), n, 0.0, Source::ClosedForm, 3.0 * spread))
        }
    }

    fn clock_level(&self, n_paths: usize, p: &Params, euler: bool) -> Result<Outcome, VerifyError> {
        let a = p.f64_or("a", 1.0)?;
        if !(a > 0.0) {
            return Err(VerifyError::BadParam(format!("a={a}")));
        }
        let exact = draws(self.seed, 0x434c, n_paths, |r| sample_besq_m1_lifetime(a, r));
        if !euler {
            return one_sample(&exact, |t| besq_m1_lifetime_cdf(a, t), false);
        }
        let dt = p.f64_or("dt", DEFAULT_DT)?;
        let seed = self.seed;
        let hits = (0..n_paths)
            .into_par_iter()
            .map(|i| Ok(sample_besq_path(a, -1.0, dt, f64::INFINITY, &mut path_rng(seed, 0x4345, i)).map_err(sim)?.lifetime))
            .collect::<Result<Vec<f64>, VerifyError>>()?;
        two_sample(&hits, &exact, true)
    }

    fn scaffolding_mass(&self, n_paths: usize, p: &Params, immigration: bool) -> Result<Outcome, VerifyError> {
        let n = p.u32_or("n", 256)?;
        let y = p.f64_or("y", 0.5)?;
        let beta = IntervalPartition::from_masses(&[0.5, 0.25, 0.25]).expect("positive masses");
        let seed = self.seed;
        let tag = if immigration { 0x5430 } else { 0x5431 };
        let xs: Vec<f64> = (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let mut rng = path_rng(seed, tag, i);
                let m = if immigration {
                    sample_type0_data(&beta, n, y + 0.01, &mut rng).total_mass(y)
                } else {
                    sample_type1_measure(&beta, n, y + 0.01, &mut rng).skewer(y).total_mass()
                };
                dequantize(m, n, rng.uniform())
            })
            .collect();
        let dim = if immigration { 1.0 } else { 0.0 };
        one_sample(&xs, |z| besq_cdf_exact(1.0, dim, y, z).expect("nonnegative dimension"), true)
    }

    fn besq_additivity(&self, n_paths: usize, p: &Params) -> Result<Outcome, VerifyError> {
        let a = p.f64_or("a", 0.6)?;
        let b = p.f64_or("b", 0.4)?;
        let y = p.f64_or("y", 0.5)?;
        let dt = p.f64_or("dt", DEFAULT_DT)?;
        let lifetime = match p.str_or("observable", "marginal") {
            "marginal" => false,
            "lifetime" => true,
            other => return Err(VerifyError::BadParam(format!("observable={other}"))),
        };
        let seed = self.seed;
        let sample = |composed: bool| {
            self.memo(format!("additivity:{composed}:{n_paths}:{a}:{b}:{dt}"), || {
                (0..n_paths)
                    .into_par_iter()
                    .map(|i| {
                        let mut rng = path_rng(seed, if composed { 0x4144 } else { 0x4145 }, i);
                        let path = if composed {
                            besq_additivity_compose(a, b, dt, &mut rng)
                        } else {
                            sample_besq_path(a + b, -1.0, dt, f64::INFINITY, &mut rng)
                        }
                        .map_err(sim)?;
                        Ok((path.value_at(y), path.lifetime))
                    })
                    .collect::<Result<Vec<(f64, f64)>, VerifyError>>()
            })
        };
        let pick = |v: &[(f64, f64)]| -> Vec<f64> { v.iter().map(|x| if lifetime { x.1 } else { x.0 }).collect() };
        two_sample(&pick(&sample(true)?), &pick(&sample(false)?), true)
    }

    fn metric_oracle(&self, n_pairs: usize, p: &Params) -> Result<Outcome, VerifyError> {
        let max_blocks = p.u32_or("max_blocks", 6)? as usize;
        let seed = self.seed;
        let mismatches = (0..n_pairs)
            .into_par_iter()
            .filter(|&i| {
                let mut rng = path_rng(seed, 0x444d, i);
                let (b, g) = (random_annotated(max_blocks, &mut rng), random_annotated(max_blocks, &mut rng));
                let d = d_ip(&b, &g);
                !d.exact || (d.value - d_ip_enumerate(&b, &g)).abs() > 1e-9
            })
            .count();
        Ok(Outcome::close(mismatches as f64, n_pairs, 0.0, Source::ExactOracle, 0.0))
    }

    fn metric_axioms(&self, n_triples: usize, p: &Params) -> Result<Outcome, VerifyError> {
        let max_blocks = p.u32_or("max_blocks", 6)? as usize;
        let seed = self.seed;
        let violations: usize = (0..n_triples)
            .into_par_iter()
            .map(|i| {
                let mut rng = path_rng(seed, 0x4d41, i);
                let [a, b, c] = [0; 3].map(|_| random_annotated(max_blocks, &mut rng));
                let d = |x, y| d_ip(x, y).value;
                let symmetric = (d(&a, &b) - d(&b, &a)).abs() <= 1e-12;
                let triangle = d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12;
                usize::from(!symmetric) + usize::from(!triangle)
            })
            .sum();
        Ok(Outcome::close(violations as f64, n_triples, 0.0, Source::ExactOracle, 0.0))
    }
}

/// Distances of the exact lattice laws to the BESQ(0) and BESQ(1)
/// marginals; counts the steps where refining the lattice does not help.
fn scaffolding_bias(p: &Params) -> Result<Outcome, VerifyError> {
    let y = p.f64_or("y", 0.5)?;
    let sizes = [64, 128, 256];
    let mut violations = 0;
    let mut detail = Vec::new();
    for immigration in [false, true] {
        let d = sizes.iter().map(|&n| lattice_besq_distance(n, n, y, immigration).map_err(sim)).collect::<Result<Vec<f64>, _>>()?;
        violations += d.windows(2).filter(|w| w[1] >= w[0]).count();
        let kind = if immigration { "type0" } else { "type1" };
        detail.push(format!("{kind} {}", d.iter().map(|x| format!("{x:.5}")).collect::<Vec<_>>().join(" > ")));
    }
    Ok(Outcome::close(violations as f64, 2 * sizes.len(), 0.0, Source::ExactOracle, 0.0).with_detail(detail.join("; ")))
}

fn aldous_uniform() -> Outcome {
    let mut failures = 0;
    let mut states = 0;
    for n in [3, 4] {
        let (trees, m) = aldous_transition_matrix(n);
        states += trees.len();
        failures += usize::from(!(m.rows_are_stochastic() && m.uniform_is_stationary()));
    }
    Outcome::close(failures as f64, states, 0.0, Source::ExactOracle, 0.0)
}

fn two_tree_lumpability(p: &Params) -> Result<Outcome, VerifyError> {
    let max_n = p.u32_or("max_n", 6)? as usize;
    if !(3..=7).contains(&max_n) {
        return Err(VerifyError::BadParam(format!("max_n={max_n}")));
    }
    let (checked, mismatches) = (3..=max_n).map(lumpability_check).fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(Outcome::close(mismatches as f64, checked, 0.0, Source::ExactOracle, 0.0))
}
