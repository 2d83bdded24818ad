//! Type-2 evolutions `(m1, m2, α)` built by alternation, deletion clocking
//! and interweaving.
//!
//! Every construction produces a [`Type2Run`]: a list of stages
//! `[Y_s, Y_{s+1})`, each with a clock spindle and an ordered list of
//! spindle ranges. At level `y` in stage `s` the clock gives the top mass
//! labelled by the stage, the first other alive spindle gives the other
//! top mass and the remaining alive spindles, in order, give `α`.

mod alternating;
mod clocking;
mod interweaving;

pub use alternating::type2_alternating;
pub use clocking::{clocking_from_lattice, type2_deletion_clocking};
pub use interweaving::type2_interweaving;

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chains::{ocrp_sample, ForestScale, SpindleForest};
use crate::ip::{diversity_estimate, IntervalPartition};
use crate::kernels::{sample_gamma, BesqPath, KernelError, DEFAULT_DT};
use crate::rng::RngStream;
use crate::scaffolding::lattice_pop;

#[derive(Debug, Error, PartialEq)]
pub enum Type2Error {
    #[error("invalid initial state: {0}")]
    InvalidState(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("interweaving order not determined below level {0}")]
    Unresolved(f64),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Type2State {
    pub m1: f64,
    pub m2: f64,
    pub alpha: IntervalPartition,
}

impl Type2State {
    pub fn new(m1: f64, m2: f64, alpha: IntervalPartition) -> Result<Self, Type2Error> {
        validate_state(m1, m2, &alpha)?;
        Ok(Self { m1, m2, alpha })
    }

    pub fn dead() -> Self {
        Self { m1: 0.0, m2: 0.0, alpha: IntervalPartition::empty() }
    }

    pub fn total_mass(&self) -> f64 {
        self.m1 + self.m2 + self.alpha.total_mass()
    }

    pub fn is_dead(&self) -> bool {
        self.m1 == 0.0 && self.m2 == 0.0 && self.alpha.is_empty()
    }
}

fn validate_state(a: f64, b: f64, beta: &IntervalPartition) -> Result<(), Type2Error> {
    if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Type2Error::InvalidState(format!("top masses ({a}, {b})")));
    }
    if a + b == 0.0 && !beta.is_empty() {
        return Err(Type2Error::InvalidState("both top masses are zero but α is not empty".into()));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Construction {
    Alternating,
    Clocking,
    Interweaving,
}

impl Construction {
    pub const ALL: [Self; 3] = [Self::Alternating, Self::Clocking, Self::Interweaving];

    pub fn name(self) -> &'static str {
        match self {
            Self::Alternating => "alternating",
            Self::Clocking => "clocking",
            Self::Interweaving => "interweaving",
        }
    }
}

impl FromStr for Construction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown construction {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Type2Config {
    /// Lattice size: masses are multiples of `1/n`.
    pub n: u32,
    /// Euler step for BESQ(−1) clocks.
    pub dt: f64,
    /// Levels up to which states are available.
    pub horizon: f64,
    /// Largest simulation level interweaving may look ahead to.
    pub max_horizon: f64,
}

impl Default for Type2Config {
    fn default() -> Self {
        Self { n: 256, dt: DEFAULT_DT, horizon: 1.0, max_horizon: 16.0 }
    }
}

impl Type2Config {
    fn validate(&self) -> Result<(), Type2Error> {
        if self.n == 0 || !(self.dt > 0.0) || !(self.horizon > 0.0) || !(self.max_horizon >= self.horizon) {
            return Err(Type2Error::InvalidConfig(format!("{self:?}")));
        }
        Ok(())
    }

    pub fn scale(&self) -> ForestScale {
        ForestScale::discrete(self.n)
    }
}

/// Initial state with populations in place of masses.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeState {
    pub a: u32,
    pub b: u32,
    pub beta: Vec<u32>,
}

impl LatticeState {
    /// Unbiased rounding of every mass; blocks rounded to zero are dropped.
    pub fn round(a: f64, b: f64, beta: &IntervalPartition, n: u32, rng: &mut RngStream) -> Self {
        let a = lattice_pop(a, n, rng);
        let b = lattice_pop(b, n, rng);
        let beta = beta.masses().map(|m| lattice_pop(m, n, rng)).filter(|&p| p > 0).collect();
        Self { a, b, beta }
    }

    pub fn is_dead(&self) -> bool {
        self.a == 0 && self.b == 0 && self.beta.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum ClockRef {
    Spindle { forest: usize, idx: usize },
    Besq { path: usize, offset: f64 },
}

/// Spindles `start..end` of a forest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Segment {
    pub forest: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Stage {
    pub start: f64,
    /// Death of the clock; infinite when it outlives the simulation.
    pub end: f64,
    pub clock: ClockRef,
    pub label: u8,
    pub others: Vec<Segment>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Degeneration {
    pub level: f64,
    /// Label of the surviving top mass.
    pub survivor: u8,
    pub mass: f64,
}

#[derive(Clone, Debug)]
pub struct Type2Run {
    construction: Construction,
    n: u32,
    horizon: f64,
    forests: Vec<SpindleForest>,
    paths: Vec<BesqPath>,
    stages: Vec<Stage>,
    swapped: bool,
    lifetime: f64,
    degeneration: Option<Degeneration>,
}

impl Type2Run {
    pub(crate) fn assemble(
        construction: Construction,
        n: u32,
        horizon: f64,
        forests: Vec<SpindleForest>,
        paths: Vec<BesqPath>,
        stages: Vec<Stage>,
        swapped: bool,
    ) -> Self {
        let lifetime = stages.last().map_or(0.0, |s| s.end);
        let mut run = Self { construction, n, horizon, forests, paths, stages, swapped, lifetime, degeneration: None };
        run.degeneration = run.find_degeneration();
        run
    }

    fn find_degeneration(&self) -> Option<Degeneration> {
        if self.stages.is_empty() {
            return Some(Degeneration { level: 0.0, survivor: self.label(1), mass: 0.0 });
        }
        for (s, st) in self.stages.iter().enumerate() {
            if st.end <= st.start {
                continue;
            }
            let ext = st
                .others
                .iter()
                .map(|g| self.forests[g.forest].deaths()[g.start..g.end].iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .fold(f64::NEG_INFINITY, f64::max);
            if ext < st.end {
                let level = ext.max(st.start);
                return Some(Degeneration { level, survivor: self.label(st.label), mass: self.clock_value(s, level) });
            }
        }
        None
    }

    pub fn construction(&self) -> Construction {
        self.construction
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Extinction level; infinite if the last clock outlives the simulation.
    pub fn lifetime(&self) -> f64 {
        self.lifetime
    }

    /// `None` when both top masses are still alive at the end of the simulation.
    pub fn degeneration(&self) -> Option<Degeneration> {
        self.degeneration
    }

    /// Clock change levels `Y_1 < Y_2 < ...` that are known.
    pub fn clock_levels(&self) -> Vec<f64> {
        self.stages.iter().skip(1).map(|s| s.start).filter(|y| y.is_finite()).collect()
    }

    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    fn label(&self, l: u8) -> u8 {
        if self.swapped {
            3 - l
        } else {
            l
        }
    }

    fn check_level(&self, y: f64) {
        assert!(y <= self.horizon || y >= self.lifetime, "level {y} is beyond the simulated horizon {}", self.horizon);
    }

    /// Index of the stage containing `y`, or `None` once the evolution is dead.
    pub fn stage_at(&self, y: f64) -> Option<usize> {
        self.check_level(y);
        let k = self.stages.partition_point(|s| s.start <= y);
        (k > 0 && y < self.stages[k - 1].end).then(|| k - 1)
    }

    fn clock_value(&self, s: usize, y: f64) -> f64 {
        match self.stages[s].clock {
            ClockRef::Spindle { forest, idx } => self.forests[forest].mass_at(idx, y),
            ClockRef::Besq { path, offset } => self.paths[path].value_at(y - offset),
        }
    }

    fn other_ids(&self, s: usize, y: f64) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut ids = Vec::new();
        for g in &self.stages[s].others {
            ids.clear();
            self.forests[g.forest].alive_in(g.start..g.end, y, &mut ids);
            out.extend(ids.iter().map(|&i| (g.forest, i)));
        }
        out
    }

    pub fn state_at(&self, y: f64) -> Type2State {
        let Some(s) = self.stage_at(y) else {
            return Type2State::dead();
        };
        let c = self.clock_value(s, y);
        let masses: Vec<f64> = self.other_ids(s, y).into_iter().map(|(f, i)| self.forests[f].mass_at(i, y)).collect();
        let (top, rest) = masses.split_first().map_or((0.0, &[][..]), |(t, r)| (*t, r));
        let alpha = IntervalPartition::from_masses(rest).expect("alive spindles have positive mass");
        if self.label(self.stages[s].label) == 1 {
            Type2State { m1: c, m2: top, alpha }
        } else {
            Type2State { m1: top, m2: c, alpha }
        }
    }

    pub fn total_mass_at(&self, y: f64) -> f64 {
        self.state_at(y).total_mass()
    }

    /// Total mass at each level of the increasing grid `levels`, summing
    /// population changes instead of reading states. `None` when a clock is
    /// a BESQ path.
    pub fn mass_on_grid(&self, levels: &[f64]) -> Option<Vec<f64>> {
        let mut acc = vec![0i64; levels.len() + 1];
        let mut ids = Vec::new();
        let top = levels.last().map_or(0.0, |&l| l);
        for st in &self.stages {
            let (a, b) = (st.start, st.end.min(top + 1.0));
            if a > top {
                break;
            }
            if a >= b {
                continue;
            }
            let ClockRef::Spindle { forest, idx } = st.clock else {
                return None;
            };
            let lo = levels.partition_point(|&l| l < a);
            let hi = levels.partition_point(|&l| l < b);
            add_spindle(&self.forests[forest], idx, a, b, &levels[..hi], lo, &mut acc);
            for g in &st.others {
                let f = &self.forests[g.forest];
                ids.clear();
                f.alive_during(g.start..g.end, a, b, &mut ids);
                for &i in &ids {
                    add_spindle(f, i, a, b, &levels[..hi], lo, &mut acc);
                }
            }
        }
        let unit = 1.0 / self.n as f64;
        let mut m = 0i64;
        Some(
            acc[..levels.len()]
                .iter()
                .map(|&d| {
                    m += d;
                    m as f64 * unit
                })
                .collect(),
        )
    }

    /// First level at which one of the two top masses is zero.
    pub fn first_top_death(&self) -> f64 {
        let Some(st) = self.stages.first() else {
            return 0.0;
        };
        let other = self.other_ids(0, 0.0).first().map_or(0.0, |&(f, i)| self.forests[f].death(i));
        st.end.min(other)
    }

    /// Label of the clock top mass at `y` (0 once dead).
    pub fn clock_label_at(&self, y: f64) -> u8 {
        self.stage_at(y).map_or(0, |s| self.label(self.stages[s].label))
    }

    /// Populations at `y` as a restart state with the clock first, and the
    /// clock's label. Only for runs whose clocks are spindles.
    pub fn lattice_state_at(&self, y: f64) -> Option<(u8, LatticeState)> {
        let s = self.stage_at(y)?;
        let a = match self.stages[s].clock {
            ClockRef::Spindle { forest, idx } => self.forests[forest].pop_at(idx, y),
            ClockRef::Besq { .. } => return None,
        };
        let pops: Vec<u32> = self.other_ids(s, y).into_iter().map(|(f, i)| self.forests[f].pop_at(i, y)).collect();
        let (b, beta) = pops.split_first().map_or((0, Vec::new()), |(b, r)| (*b, r.to_vec()));
        Some((self.label(self.stages[s].label), LatticeState { a, b, beta }))
    }

    /// States on `levels` (each within the horizon or past the lifetime).
    pub fn record_at(&self, levels: &[f64]) -> Type2Path {
        let states = levels.iter().map(|&y| self.state_at(y)).collect();
        Type2Path {
            construction: self.construction,
            n: self.n,
            levels: levels.to_vec(),
            states,
            clock_index: levels.iter().map(|&y| self.clock_label_at(y)).collect(),
            stage: levels.iter().map(|&y| self.stage_at(y).unwrap_or(self.stages.len())).collect(),
            clock_levels: self.clock_levels(),
            degeneration: self.degeneration,
            lifetime: self.lifetime,
        }
    }

    /// Uniform grid of step `dy` up to the horizon (or the lifetime), with
    /// every clock level and the lifetime inserted.
    pub fn record(&self, dy: f64) -> Type2Path {
        assert!(dy > 0.0, "grid step must be positive");
        let top = self.horizon.min(self.lifetime);
        let mut levels: Vec<f64> = (0..).map(|k| k as f64 * dy).take_while(|&y| y <= top).collect();
        levels.extend(self.clock_levels().into_iter().filter(|&y| y <= self.horizon));
        if self.lifetime <= self.horizon {
            levels.push(self.lifetime);
        }
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        self.record_at(&levels)
    }
}

/// Adds the population of spindle `i` on `[a, b)` to the difference array
/// `acc` of the grid `levels` (all below `b`), whose first point in `[a, b)` is `lo`.
fn add_spindle(f: &SpindleForest, i: usize, a: f64, b: f64, levels: &[f64], lo: usize, acc: &mut [i64]) {
    let hi = levels.len();
    let mut prev = f.pop_at(i, a) as i64;
    acc[lo] += prev;
    let (lv, pp) = f.events(i);
    let first = lv.partition_point(|&l| l <= a);
    if let Some(&l0) = lv.get(first) {
        let mut j = lo + levels[lo..].partition_point(|&x| x < l0);
        for k in first..lv.len() {
            let l = lv[k];
            if l >= b {
                break;
            }
            while j < hi && levels[j] < l {
                j += 1;
            }
            let p = pp[k] as i64;
            acc[j] += p - prev;
            prev = p;
        }
    }
    acc[hi] -= prev;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Type2Path {
    pub construction: Construction,
    pub n: u32,
    pub levels: Vec<f64>,
    pub states: Vec<Type2State>,
    /// Label of the clock top mass, 0 once dead.
    pub clock_index: Vec<u8>,
    /// Number of clock changes so far.
    pub stage: Vec<usize>,
    pub clock_levels: Vec<f64>,
    pub degeneration: Option<Degeneration>,
    pub lifetime: f64,
}

pub const PATH_CSV_HEADER: &str = "path_id,y,m1,m2,alpha_mass,n_blocks,total_diversity,clock_index,J";

impl Type2Path {
    pub fn total_mass(&self) -> Vec<f64> {
        self.states.iter().map(Type2State::total_mass).collect()
    }

    /// CSV rows (no header); diversity is estimated with threshold `10/n`.
    pub fn csv_rows(&self, path_id: usize) -> String {
        let h = 10.0 / self.n as f64;
        let mut s = String::new();
        for (k, (y, st)) in self.levels.iter().zip(&self.states).enumerate() {
            let _ = writeln!(
                s,
                "{path_id},{y},{},{},{},{},{},{},{}",
                st.m1,
                st.m2,
                st.alpha.total_mass(),
                st.alpha.len(),
                diversity_estimate(&st.alpha, h, None),
                self.clock_index[k],
                self.stage[k]
            );
        }
        s
    }
}

pub fn total_mass(path: &Type2Path) -> Vec<f64> {
    path.total_mass()
}

pub fn degeneration(path: &Type2Path) -> Option<Degeneration> {
    path.degeneration
}

/// Runs the requested construction from `(a, b, β)`; interweaving ignores
/// `β` and draws its own pseudo-stationary `α` with rate `gamma`.
pub fn run_construction(
    construction: Construction,
    a: f64,
    b: f64,
    beta: &IntervalPartition,
    gamma: f64,
    cfg: &Type2Config,
    rng: &mut RngStream,
) -> Result<Type2Run, Type2Error> {
    match construction {
        Construction::Alternating => type2_alternating(a, b, beta, cfg, rng),
        Construction::Clocking => type2_deletion_clocking(a, b, beta, cfg, rng),
        Construction::Interweaving => type2_interweaving(a, b, gamma, cfg, rng),
    }
}

/// Runs a construction from the pseudo-stationary law: `m1, m2, C` i.i.d.
/// `Gamma(1/2, gamma)` and `α = C β̄` with `β̄ ~ PDIP(1/2, 1/2)`, realized
/// on the lattice as an ordered restaurant with `round(C n)` customers.
pub fn run_pseudo_stationary(construction: Construction, gamma: f64, cfg: &Type2Config, rng: &mut RngStream) -> Result<Type2Run, Type2Error> {
    cfg.validate()?;
    if !(gamma > 0.0) {
        return Err(Type2Error::InvalidState(format!("gamma={gamma}")));
    }
    let n = cfg.n;
    let a = sample_gamma(0.5, gamma, rng)?;
    let b = sample_gamma(0.5, gamma, rng)?;
    let b_pop = lattice_pop(b, n, rng);
    match construction {
        Construction::Interweaving => interweaving::interweave_from_lattice([lattice_pop(a, n, rng), b_pop], gamma, cfg, rng),
        _ => {
            let c = sample_gamma(0.5, gamma, rng)?;
            let beta = ocrp_sample(0.5, lattice_pop(c, n, rng) as usize, rng);
            if construction == Construction::Alternating {
                alternating::alternate(a, std::iter::once(b_pop).chain(beta).collect(), cfg, rng)
            } else {
                let init = LatticeState { a: lattice_pop(a, n, rng), b: b_pop, beta };
                clocking_from_lattice(&init, false, cfg, rng)
            }
        }
    }
}

#[cfg(test)]
mod tests;
