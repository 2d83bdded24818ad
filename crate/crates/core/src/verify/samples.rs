//! Path ensembles shared between battery tests. Path `i` always draws from
//! its own stream, and results are collected in index order, so an ensemble
//! depends only on its parameters and seed.

use rayon::prelude::*;

use crate::depoisson::{killed_projection, resampling_2tree, wf_reference, DePoissonError};
use crate::ip::scale;
use crate::kernels::sample_pdip;
use crate::rng::RngStream;
use crate::type2::{run_pseudo_stationary, Construction, Degeneration, Type2Config, Type2Error, Type2State};

pub(crate) fn path_rng(seed: u64, tag: u64, i: usize) -> RngStream {
    RngStream::new(seed, i as u64).derive(tag)
}

/// Spreads a lattice value `k/n` uniformly over `((k-1)/n, k/n]` using the
/// uniform `u`. Zero and values off the lattice are returned unchanged.
pub fn dequantize(x: f64, n: u32, u: f64) -> f64 {
    let k = x * n as f64;
    if x > 0.0 && (k - k.round()).abs() < 1e-6 {
        (k.round() - u) / n as f64
    } else {
        x
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Masses {
    pub m1: f64,
    pub m2: f64,
    pub alpha: f64,
}

impl Masses {
    pub fn total(&self) -> f64 {
        self.m1 + self.m2 + self.alpha
    }

    pub fn get(&self, coord: usize) -> f64 {
        match coord {
            1 => self.m1,
            2 => self.m2,
            _ => self.alpha,
        }
    }

    fn observe(st: &Type2State, n: u32, rng: &mut RngStream) -> Self {
        Self {
            m1: dequantize(st.m1, n, rng.uniform()),
            m2: dequantize(st.m2, n, rng.uniform()),
            alpha: dequantize(st.alpha.total_mass(), n, rng.uniform()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PseudoRecord {
    /// Dequantized masses at each level of the ensemble.
    pub at: Vec<Masses>,
    /// With the surviving mass dequantized.
    pub degeneration: Option<Degeneration>,
}

/// Runs of one construction from the pseudo-stationary law.
#[derive(Clone, Debug)]
pub struct PseudoSample {
    pub levels: Vec<f64>,
    /// `None` for runs whose interweaving order stayed undetermined.
    pub records: Vec<Option<PseudoRecord>>,
}

impl PseudoSample {
    pub fn generate(
        construction: Construction,
        gamma: f64,
        cfg: &Type2Config,
        levels: &[f64],
        n_paths: usize,
        seed: u64,
    ) -> Result<Self, Type2Error> {
        let tag = 0x5053_0000 + construction as u64;
        let records = (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let mut rng = path_rng(seed, tag, i);
                let run = match run_pseudo_stationary(construction, gamma, cfg, &mut rng) {
                    Ok(run) => run,
                    Err(Type2Error::Unresolved(_)) => return Ok(None),
                    Err(e) => return Err(e),
                };
                let mut dq = rng.derive(1);
                let at = levels.iter().map(|&y| Masses::observe(&run.state_at(y), cfg.n, &mut dq)).collect();
                let degeneration = run.degeneration().map(|d| Degeneration { mass: dequantize(d.mass, cfg.n, dq.uniform()), ..d });
                Ok(Some(PseudoRecord { at, degeneration }))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { levels: levels.to_vec(), records })
    }

    pub fn level_index(&self, y: f64) -> Option<usize> {
        self.levels.iter().position(|&l| (l - y).abs() < 1e-12)
    }

    pub fn resolved(&self) -> impl Iterator<Item = &PseudoRecord> {
        self.records.iter().flatten()
    }
}

/// Normalized, dequantized `(x1, x2, x3)` of resampling 2-tree paths from
/// `(0.9, 0.05, 0.05 β̄)` at the requested times.
pub fn two_tree_sample(cfg: &Type2Config, times: &[f64], n_paths: usize, seed: u64) -> Result<Vec<Vec<Masses>>, DePoissonError> {
    let du = 0.5;
    let horizon_u = times.iter().copied().fold(0.0, f64::max);
    let n = cfg.n;
    (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, 0x3254, i);
            let alpha = scale(0.05, &sample_pdip(0.5, n as usize, &mut rng)?);
            let init = Type2State::new(0.9, 0.05, alpha)?;
            let path = resampling_2tree(&init, horizon_u, du, cfg, &mut rng)?.path;
            let mut dq = rng.derive(1);
            times
                .iter()
                .map(|&u| {
                    let k = path.u.iter().position(|&v| (v - u).abs() < du / 2.0).ok_or_else(|| DePoissonError::Invalid(format!("u={u} not on the grid")))?;
                    let (st, m) = (&path.states[k], path.mass[k]);
                    let raw = Type2State { m1: st.m1 * m, m2: st.m2 * m, alpha: scale(m, &st.alpha) };
                    let x = Masses::observe(&raw, n, &mut dq);
                    Ok(Masses { m1: x.m1 / m, m2: x.m2 / m, alpha: x.alpha / m })
                })
                .collect()
        })
        .collect()
}

const KILLED_BATCH: usize = 1024;

/// First `target` surviving values at `u` by try index, from either the
/// projected deletion clocking (`cfg` set) or the Wright–Fisher reference.
pub fn killed_sample(
    x0: (f64, f64, f64),
    u: f64,
    cfg: Option<&Type2Config>,
    dt: f64,
    target: usize,
    seed: u64,
) -> Result<(Vec<(f64, f64, f64)>, usize), DePoissonError> {
    let du = u / 2.0;
    let tag = if cfg.is_some() { 0x4b50 } else { 0x4b52 };
    let mut out = Vec::with_capacity(target);
    let mut tries = 0;
    while out.len() < target {
        let batch: Vec<Option<(f64, f64, f64)>> = (tries..tries + KILLED_BATCH)
            .into_par_iter()
            .map(|i| {
                let mut rng = path_rng(seed, tag, i);
                let p = match cfg {
                    Some(c) => killed_projection(x0, u, du, c, &mut rng)?,
                    None => wf_reference(x0, du, u, dt, &mut rng)?,
                };
                Ok(p.get(2).copied())
            })
            .collect::<Result<_, DePoissonError>>()?;
        for x in batch {
            tries += 1;
            if let Some(x) = x {
                out.push(x);
                if out.len() == target {
                    break;
                }
            }
        }
    }
    Ok((out, tries))
}
