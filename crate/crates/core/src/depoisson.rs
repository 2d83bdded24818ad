//! De-Poissonization of type-2 evolutions, the resampling 2-tree evolution
//! and the reference Wright–Fisher construction from independent BESQ
//! processes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chains::ocrp_sample;
use crate::ip::IntervalPartition;
use crate::kernels::{sample_besq_path, sample_dirichlet_half, sample_pdip, KernelError};
use crate::rng::RngStream;
use crate::scaffolding::lattice_pop;
use crate::type2::{clocking_from_lattice, LatticeState, Type2Config, Type2Error, Type2Path, Type2Run, Type2State};

pub const DEPOISSON_CSV_HEADER: &str = "path_id,u,x1,x2,x3,n_blocks,jump_flag";

/// Level step for integrating `1 / M` along a run.
pub const LEVEL_STEP: f64 = 1e-3;

/// Levels per restart of a 2-tree segment, at unit mass.
const CHUNK: f64 = 0.025;

#[derive(Debug, Error)]
pub enum DePoissonError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Type2(#[from] Type2Error),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DePoissonizedPath {
    pub u: Vec<f64>,
    /// Unit-mass states.
    pub states: Vec<Type2State>,
    /// `ρ(u)`, the level of the underlying evolution.
    pub rho: Vec<f64>,
    /// Total mass before normalization.
    pub mass: Vec<f64>,
    /// Set on the first grid point after a resampling jump.
    pub jump: Vec<bool>,
}

impl DePoissonizedPath {
    fn empty() -> Self {
        Self { u: Vec::new(), states: Vec::new(), rho: Vec::new(), mass: Vec::new(), jump: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn csv_rows(&self, path_id: usize) -> String {
        let mut s = String::new();
        for (k, st) in self.states.iter().enumerate() {
            let _ = writeln!(
                s,
                "{path_id},{},{},{},{},{},{}",
                self.u[k],
                st.m1,
                st.m2,
                st.alpha.total_mass(),
                st.alpha.len(),
                self.jump[k] as u8
            );
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoTreePath {
    pub path: DePoissonizedPath,
    /// Resampling times `V_1 < V_2 < ...`.
    pub resample_times: Vec<f64>,
}

/// Cumulative trapezoid integral of `1 / M` on `levels`, stopping before the
/// first level where `M` vanishes.
pub fn time_change(levels: &[f64], masses: &[f64]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(levels.len());
    if levels.is_empty() || masses[0] <= 0.0 {
        return cum;
    }
    cum.push(0.0);
    for k in 1..levels.len() {
        if masses[k] <= 0.0 {
            break;
        }
        let step = 0.5 * (levels[k] - levels[k - 1]) * (1.0 / masses[k - 1] + 1.0 / masses[k]);
        cum.push(cum[k - 1] + step);
    }
    cum
}

/// `ρ(u)`: the level where the cumulative integral reaches `u`, by
/// bisection on the grid and linear interpolation inside the cell.
pub fn invert_time_change(levels: &[f64], cum: &[f64], u: f64) -> Option<f64> {
    let last = *cum.last()?;
    if u < 0.0 || u > last {
        return None;
    }
    let k = cum.partition_point(|&c| c < u);
    if k == 0 {
        return Some(levels[0]);
    }
    let (c0, c1) = (cum[k - 1], cum[k]);
    let w = if c1 > c0 { (u - c0) / (c1 - c0) } else { 1.0 };
    Some(levels[k - 1] + w * (levels[k] - levels[k - 1]))
}

pub fn normalize(st: &Type2State) -> Type2State {
    let m = st.total_mass();
    if m <= 0.0 {
        return st.clone();
    }
    let alpha = IntervalPartition::from_masses(&st.alpha.masses().map(|x| x / m).collect::<Vec<_>>()).expect("positive masses");
    Type2State { m1: st.m1 / m, m2: st.m2 / m, alpha }
}

fn u_grid(du: f64, horizon_u: f64) -> Vec<f64> {
    (0..).map(|k| k as f64 * du).take_while(|&u| u <= horizon_u + 1e-12).collect()
}

/// De-Poissonizes a recorded path on its own level grid; each `u` takes the
/// recorded state at the last level not above `ρ(u)`.
pub fn depoissonize(path: &Type2Path, du: f64) -> Result<DePoissonizedPath, DePoissonError> {
    if !(du > 0.0) {
        return Err(DePoissonError::Invalid(format!("du={du}")));
    }
    let masses = path.total_mass();
    let cum = time_change(&path.levels, &masses);
    let mut out = DePoissonizedPath::empty();
    let Some(&last) = cum.last() else {
        return Ok(out);
    };
    for u in u_grid(du, last) {
        let y = invert_time_change(&path.levels, &cum, u).expect("u within range");
        let k = path.levels.partition_point(|&l| l <= y) - 1;
        out.u.push(u);
        out.rho.push(y);
        out.mass.push(path.states[k].total_mass());
        out.states.push(normalize(&path.states[k]));
        out.jump.push(false);
    }
    Ok(out)
}

/// Integral of `1 / M` along `run` on `[0, top]`, on a grid of step [`LEVEL_STEP`].
fn run_time_change(run: &Type2Run, top: f64) -> Result<(Vec<f64>, Vec<f64>), DePoissonError> {
    let mut levels: Vec<f64> = (0..).map(|k| k as f64 * LEVEL_STEP).take_while(|&y| y < top).collect();
    levels.push(top);
    let masses = run.mass_on_grid(&levels).ok_or_else(|| DePoissonError::Invalid("clocks must be spindles".into()))?;
    let cum = time_change(&levels, &masses);
    levels.truncate(cum.len());
    Ok((levels, cum))
}

/// Unit-mass draw from `Dir(1/2,1/2,1/2) ⊗ PDIP(1/2,1/2)`.
pub fn sample_mu(n_approx: usize, rng: &mut RngStream) -> Result<Type2State, DePoissonError> {
    let (x1, x2, x3) = sample_dirichlet_half(rng);
    let alpha = crate::ip::scale(x3, &sample_pdip(0.5, n_approx, rng)?);
    Ok(Type2State { m1: x1, m2: x2, alpha })
}

/// Lattice version of [`sample_mu`]: `‖α‖ n` customers seated by an ordered restaurant.
pub fn sample_mu_lattice(n: u32, rng: &mut RngStream) -> LatticeState {
    let (x1, x2, x3) = sample_dirichlet_half(rng);
    let a = lattice_pop(x1, n, rng);
    let b = lattice_pop(x2, n, rng);
    let beta = ocrp_sample(0.5, lattice_pop(x3, n, rng) as usize, rng);
    LatticeState { a, b, beta }
}

/// Lattice state for `(x1, x2, x3 β̄)` with `β̄ ~ PDIP(1/2, 1/2)`.
pub fn pseudo_stationary_lattice(x: (f64, f64, f64), n: u32, rng: &mut RngStream) -> LatticeState {
    let a = lattice_pop(x.0, n, rng);
    let b = lattice_pop(x.1, n, rng);
    let beta = ocrp_sample(0.5, lattice_pop(x.2, n, rng) as usize, rng);
    LatticeState { a, b, beta }
}

fn check_unit(st: &Type2State) -> Result<(), DePoissonError> {
    if (st.total_mass() - 1.0).abs() > 1e-9 || st.m1 + st.m2 <= 0.0 {
        return Err(DePoissonError::Invalid(format!("initial state must have unit mass and a positive top, got {st:?}")));
    }
    Ok(())
}

/// Resampling 2-tree evolution on `[0, horizon_u]`: de-Poissonized
/// deletion clocking run to degeneration, then restarted from a fresh draw
/// of `μ`. Each segment is simulated in short chunks of levels; the time
/// change does not see the total mass, so every chunk restarts from the
/// lattice state scaled back up to about `n` individuals.
pub fn resampling_2tree(
    initial: &Type2State,
    horizon_u: f64,
    du: f64,
    cfg: &Type2Config,
    rng: &mut RngStream,
) -> Result<TwoTreePath, DePoissonError> {
    check_unit(initial)?;
    if !(du > 0.0 && horizon_u >= 0.0) {
        return Err(DePoissonError::Invalid(format!("du={du}, horizon_u={horizon_u}")));
    }
    let chunk = Type2Config { horizon: CHUNK, max_horizon: CHUNK.max(cfg.max_horizon), ..*cfg };
    let grid = u_grid(du, horizon_u);
    let mut out = DePoissonizedPath::empty();
    let mut resample_times = Vec::new();
    let mut init = LatticeState::round(initial.m1, initial.m2, &initial.alpha, cfg.n, rng);
    let mut swapped = false;
    let mut u_base = 0.0;
    let mut jumped = false;
    let mut k = 0;
    while k < grid.len() {
        let run = clocking_from_lattice(&init, swapped, &chunk, rng)?;
        let d = run.degeneration().filter(|d| d.level <= CHUNK);
        let top = d.map_or(CHUNK, |d| d.level);
        let (levels, cum) = run_time_change(&run, top)?;
        let span = cum.last().copied().unwrap_or(0.0);
        while k < grid.len() && grid[k] <= u_base + span {
            let y = invert_time_change(&levels, &cum, grid[k] - u_base).expect("u within segment");
            out.u.push(grid[k]);
            out.rho.push(y);
            let st = run.state_at(y);
            out.mass.push(st.total_mass());
            out.states.push(normalize(&st));
            out.jump.push(std::mem::take(&mut jumped));
            k += 1;
        }
        u_base += span;
        if d.is_some() {
            resample_times.push(u_base);
            init = sample_mu_lattice(cfg.n, rng);
            swapped = false;
            jumped = true;
        } else {
            let (label, next) = run.lattice_state_at(CHUNK).ok_or_else(|| DePoissonError::Invalid("evolution died before degenerating".into()))?;
            init = rescale_up(&next, cfg.n, rng);
            swapped = label == 2;
        }
    }
    Ok(TwoTreePath { path: out, resample_times })
}

/// Multiplies all populations by `n / total` with unbiased rounding when
/// the total has dropped below `n`; no block is lost.
pub fn rescale_up(s: &LatticeState, n: u32, rng: &mut RngStream) -> LatticeState {
    let total = s.a as u64 + s.b as u64 + s.beta.iter().map(|&p| p as u64).sum::<u64>();
    if total == 0 || total >= n as u64 {
        return s.clone();
    }
    let f = n as f64 / total as f64;
    let mut up = |p: u32| lattice_pop(p as f64 * f, 1, rng);
    LatticeState { a: up(s.a), b: up(s.b), beta: s.beta.iter().map(|&p| up(p)).collect() }
}

/// De-Poissonized deletion clocking from `(x1, x2, x3 β̄)`, killed at the
/// first level where a top mass vanishes.
pub fn killed_projection(
    x0: (f64, f64, f64),
    horizon_u: f64,
    du: f64,
    cfg: &Type2Config,
    rng: &mut RngStream,
) -> Result<Vec<(f64, f64, f64)>, DePoissonError> {
    check_simplex(x0)?;
    let init = pseudo_stationary_lattice(x0, cfg.n, rng);
    let start = rng.clone();
    let mut h = cfg.horizon;
    // Rerun with the same randomness and a doubled horizon until the kill
    // level or `horizon_u` is reached.
    let (run, kill, levels, cum) = loop {
        *rng = start.clone();
        let c = Type2Config { horizon: h, max_horizon: h.max(cfg.max_horizon), ..*cfg };
        let run = clocking_from_lattice(&init, false, &c, rng)?;
        let kill = run.first_top_death();
        let (levels, cum) = run_time_change(&run, kill.min(h))?;
        if kill <= h || cum.last().is_some_and(|&c| c >= horizon_u) {
            break (run, kill, levels, cum);
        }
        h *= 2.0;
    };
    let mut out = Vec::new();
    for u in u_grid(du, horizon_u) {
        match invert_time_change(&levels, &cum, u) {
            Some(y) if y < kill => {
                let st = run.state_at(y);
                let m = st.total_mass();
                out.push((st.m1 / m, st.m2 / m, st.alpha.total_mass() / m));
            }
            _ => break,
        }
    }
    Ok(out)
}

/// `(m1, m2, ‖α‖)` along a de-Poissonized path.
pub fn project_3mass(path: &DePoissonizedPath) -> Vec<(f64, f64, f64)> {
    path.states.iter().map(|s| (s.m1, s.m2, s.alpha.total_mass())).collect()
}

fn check_simplex(x0: (f64, f64, f64)) -> Result<(), DePoissonError> {
    let (a, b, c) = x0;
    if !(a > 0.0 && b > 0.0 && c > 0.0 && (a + b + c - 1.0).abs() < 1e-9) {
        return Err(DePoissonError::Invalid(format!("{x0:?} is not in the open simplex")));
    }
    Ok(())
}

/// Independent BESQ(−1), BESQ(−1) and BESQ(1) processes from `x0`,
/// normalized and time-changed by the inverse total mass, up to the first
/// time one of the first two coordinates hits zero.
pub fn wf_reference(x0: (f64, f64, f64), du: f64, horizon_u: f64, dt: f64, rng: &mut RngStream) -> Result<Vec<(f64, f64, f64)>, DePoissonError> {
    check_simplex(x0)?;
    if !(du > 0.0 && dt > 0.0) {
        return Err(DePoissonError::Invalid(format!("du={du}, dt={dt}")));
    }
    // Levels grow at most as fast as u times the running maximum of the
    // mass; extend until the u horizon is covered or a top coordinate dies.
    let mut h = 2.0 * horizon_u.max(dt);
    loop {
        let z1 = sample_besq_path(x0.0, -1.0, dt, h, rng)?;
        let z2 = sample_besq_path(x0.1, -1.0, dt, h, rng)?;
        let z3 = sample_besq_path(x0.2, 1.0, dt, h, rng)?;
        let kill = z1.lifetime.min(z2.lifetime);
        let top = kill.min(h);
        let mut levels: Vec<f64> = (0..).map(|k| k as f64 * dt).take_while(|&y| y < top).collect();
        levels.push(top);
        let value = |y: f64| (z1.value_at(y), z2.value_at(y), z3.value_at(y));
        let masses: Vec<f64> = levels.iter().map(|&y| {
            let v = value(y);
            v.0 + v.1 + v.2
        }).collect();
        let cum = time_change(&levels, &masses);
        let covered = cum.last().is_some_and(|&c| c >= horizon_u);
        if covered || kill <= h {
            let mut out = Vec::new();
            for u in u_grid(du, horizon_u) {
                match invert_time_change(&levels[..cum.len()], &cum, u) {
                    Some(y) if y < kill => {
                        let v = value(y);
                        let m = v.0 + v.1 + v.2;
                        out.push((v.0 / m, v.1 / m, v.2 / m));
                    }
                    _ => break,
                }
            }
            return Ok(out);
        }
        h *= 2.0;
    }
}
