//! Splitting trees of birth–death spindles, their jumping chronological
//! contour process (JCCP), and the skewer.
//!
//! Spindles are stored in contour (preorder) order: children are visited in
//! decreasing birth level, so the alive spindles at any level, read in
//! storage order, are the tables of the Poissonized down-up chain from left
//! to right. A population `m` moves down at rate `m` and up at rate
//! `m - 1/2`; while alive a spindle has children at rate `1/2`, each born
//! with population 1 immediately to its right.
//!
//! Chain time `t` is mapped to level `t * level_unit`; populations are read
//! as masses `m * mass_unit`.

use std::fmt::Write as _;
use std::ops::Range;

use rand::rngs::SmallRng;
use rand::{RngCore, SeedableRng};
use rand_distr::{Distribution, Exp1};

use super::crp::{CrpConfig, CrpParams};
use super::ChainError;
use crate::rng::RngStream;

pub const NIL: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RootKind {
    /// A spindle together with all its descendants.
    Clade,
    /// A spindle that never has children.
    Lone,
    /// A clade attached as a child of the nearest preceding non-graft root,
    /// which must be `Lone`; grafts must follow it by decreasing birth.
    Graft,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootSpec {
    pub birth: f64,
    pub pop: u32,
    pub kind: RootKind,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForestScale {
    pub level_unit: f64,
    pub mass_unit: f64,
}

impl ForestScale {
    pub const UNIT: Self = Self { level_unit: 1.0, mass_unit: 1.0 };

    /// Masses `m / n`, levels `t / 2n`: drift −1 and variance `4x` per unit level.
    pub fn discrete(n: u32) -> Self {
        Self { level_unit: 0.5 / n as f64, mass_unit: 1.0 / n as f64 }
    }
}

#[derive(Clone, Debug)]
pub struct SpindleForest {
    scale: ForestScale,
    horizon: f64,
    /// Event lists are kept below this level; later populations are recomputed.
    store_until: f64,
    birth: Vec<f64>,
    /// `f64::INFINITY` for spindles alive at the horizon.
    death: Vec<f64>,
    parent: Vec<u32>,
    subtree_end: Vec<u32>,
    roots: Vec<u32>,
    pop0: Vec<u32>,
    seed: Vec<u64>,
    ev_off: Vec<u32>,
    ev_level: Vec<f64>,
    ev_pop: Vec<u32>,
}

struct Pending {
    birth: f64,
    pop: u32,
    seed: u64,
    spawns: bool,
    parent: u32,
    root: bool,
}

const CHILD_STREAM: u64 = 0x6a09_e667_f3bc_c909;
const TWO_M32: f64 = 1.0 / 4_294_967_296.0;

/// Birth–death walk of one spindle from `birth` until it dies or reaches
/// `until`. `visit` sees every event and may stop the walk by returning false.
fn walk(birth: f64, pop: u32, level_unit: f64, until: f64, rng: &mut SmallRng, mut visit: impl FnMut(f64, u32) -> bool) -> f64 {
    let mut m = pop;
    let mut y = birth;
    if !visit(y, m) || m == 0 {
        return y;
    }
    loop {
        let mf = m as f64;
        let rate = 2.0 * mf - 0.5;
        let e: f64 = Exp1.sample(rng);
        let u2 = rng.next_u32() as f64 * TWO_M32;
        y += e * level_unit / rate;
        if y >= until {
            return f64::INFINITY;
        }
        if u2 * rate < mf - 0.5 {
            m += 1;
        } else {
            m -= 1;
        }
        if !visit(y, m) || m == 0 {
            return y;
        }
    }
}

impl SpindleForest {
    /// Simulate the roots (left to right) and all their descendants up to `horizon`.
    pub fn simulate(roots: &[RootSpec], scale: ForestScale, horizon: f64, rng: &mut RngStream) -> Self {
        Self::simulate_stored(roots, scale, horizon, horizon, rng)
    }

    /// Like [`simulate`](Self::simulate), keeping event lists only below `store_until`.
    pub fn simulate_stored(roots: &[RootSpec], scale: ForestScale, horizon: f64, store_until: f64, rng: &mut RngStream) -> Self {
        let seeded: Vec<(RootSpec, u64)> = roots.iter().map(|r| (*r, rng.next_u64())).collect();
        Self::simulate_seeded(&seeded, scale, horizon, store_until)
    }

    /// Every spindle runs on its own generator, so the same root seeds with
    /// a larger horizon reproduce the forest below the smaller one.
    pub fn simulate_seeded(roots: &[(RootSpec, u64)], scale: ForestScale, horizon: f64, store_until: f64) -> Self {
        let store_until = store_until.min(horizon);
        let mut f = Self {
            scale,
            horizon,
            store_until,
            birth: Vec::new(),
            death: Vec::new(),
            parent: Vec::new(),
            subtree_end: Vec::new(),
            roots: Vec::new(),
            pop0: Vec::new(),
            seed: Vec::new(),
            ev_off: vec![0],
            ev_level: Vec::new(),
            ev_pop: Vec::new(),
        };
        // Roughly two events per individual per level unit.
        let est: f64 = roots.iter().map(|(r, _)| 2.5 * r.pop as f64 * (store_until - r.birth).max(0.0) / scale.level_unit).sum();
        if est.is_finite() {
            let est = est.min(1e7) as usize;
            f.ev_level.reserve(est);
            f.ev_pop.reserve(est);
        }
        let mut stack: Vec<Pending> = roots
            .iter()
            .rev()
            .map(|&(r, seed)| Pending {
                birth: r.birth,
                pop: r.pop,
                seed,
                spawns: r.kind != RootKind::Lone,
                parent: NIL,
                root: r.kind != RootKind::Graft,
            })
            .collect();
        let mut kids: Vec<(f64, u64)> = Vec::new();
        let child_gap = 2.0 * scale.level_unit;
        let mut host = NIL;
        while let Some(p) = stack.pop() {
            let idx = f.birth.len() as u32;
            if p.root {
                f.roots.push(idx);
                host = idx;
            }
            let mut bd = SmallRng::seed_from_u64(p.seed);
            let (lv, pp) = (&mut f.ev_level, &mut f.ev_pop);
            let death = walk(p.birth, p.pop, scale.level_unit, horizon, &mut bd, |y, m| {
                if y < store_until {
                    lv.push(y);
                    pp.push(m);
                }
                true
            });
            f.birth.push(p.birth);
            f.death.push(death);
            f.parent.push(if p.parent == NIL && !p.root { host } else { p.parent });
            f.pop0.push(p.pop);
            f.seed.push(p.seed);
            f.ev_off.push(f.ev_level.len() as u32);
            if p.spawns {
                let mut cr = SmallRng::seed_from_u64(p.seed ^ CHILD_STREAM);
                kids.clear();
                let end = death.min(horizon);
                let mut y = p.birth;
                loop {
                    let e: f64 = Exp1.sample(&mut cr);
                    y += child_gap * e;
                    if y >= end {
                        break;
                    }
                    kids.push((y, cr.next_u64()));
                }
                // Increasing births pushed in order: the latest child is visited first.
                for &(b, seed) in &kids {
                    stack.push(Pending { birth: b, pop: 1, seed, spawns: true, parent: idx, root: false });
                }
            }
        }
        let n = f.birth.len();
        f.subtree_end = (0..n as u32).collect();
        for i in (0..n).rev() {
            let p = f.parent[i];
            if p != NIL {
                let e = f.subtree_end[i];
                let pe = &mut f.subtree_end[p as usize];
                *pe = (*pe).max(e);
            }
        }
        f
    }

    pub fn empty(scale: ForestScale, horizon: f64) -> Self {
        Self::simulate(&[], scale, horizon, &mut RngStream::new(0, 0))
    }

    pub fn scale(&self) -> ForestScale {
        self.scale
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn store_until(&self) -> f64 {
        self.store_until
    }

    pub fn len(&self) -> usize {
        self.birth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.birth.is_empty()
    }

    pub fn roots(&self) -> &[u32] {
        &self.roots
    }

    #[inline]
    pub fn birth(&self, i: usize) -> f64 {
        self.birth[i]
    }

    #[inline]
    pub fn death(&self, i: usize) -> f64 {
        self.death[i]
    }

    pub fn deaths(&self) -> &[f64] {
        &self.death
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        (self.parent[i] != NIL).then_some(self.parent[i] as usize)
    }

    #[inline]
    pub fn subtree_end(&self, i: usize) -> usize {
        self.subtree_end[i] as usize
    }

    /// Children of `i` in storage order, i.e. by decreasing birth level.
    pub fn children(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let end = self.subtree_end(i);
        let mut c = i + 1;
        std::iter::from_fn(move || {
            if c > end {
                return None;
            }
            let out = c;
            c = self.subtree_end(c) + 1;
            Some(out)
        })
    }

    /// Events of spindle `i` below the storage level.
    pub fn events(&self, i: usize) -> (&[f64], &[u32]) {
        let r = self.ev_off[i] as usize..self.ev_off[i + 1] as usize;
        (&self.ev_level[r.clone()], &self.ev_pop[r])
    }

    pub fn event_count(&self) -> usize {
        self.ev_level.len()
    }

    #[inline]
    pub fn alive_at(&self, i: usize, y: f64) -> bool {
        self.birth[i] <= y && y < self.death[i]
    }

    /// Population of spindle `i` at level `y` (0 outside its life).
    pub fn pop_at(&self, i: usize, y: f64) -> u32 {
        if !self.alive_at(i, y) {
            return 0;
        }
        if y < self.store_until || self.store_until >= self.horizon {
            let (lv, pp) = self.events(i);
            let k = lv.partition_point(|&l| l <= y);
            return pp[k - 1];
        }
        let mut rng = SmallRng::seed_from_u64(self.seed[i]);
        let mut m = self.pop0[i];
        walk(self.birth[i], m, self.scale.level_unit, self.horizon, &mut rng, |l, p| {
            if l > y {
                return false;
            }
            m = p;
            true
        });
        m
    }

    pub fn mass_at(&self, i: usize, y: f64) -> f64 {
        self.pop_at(i, y) as f64 * self.scale.mass_unit
    }

    /// Spindles of `range` alive somewhere in `[a, b)`, in order.
    pub fn alive_during(&self, range: Range<usize>, a: f64, b: f64, out: &mut Vec<usize>) {
        let mut i = range.start;
        while i < range.end {
            if self.birth[i] >= b {
                i = self.subtree_end(i) + 1;
                continue;
            }
            if a < self.death[i] {
                out.push(i);
            }
            i += 1;
        }
    }

    /// Spindles of `range` alive at `y`, in order; subtrees born above `y` are skipped.
    pub fn alive_in(&self, range: Range<usize>, y: f64, out: &mut Vec<usize>) {
        let mut i = range.start;
        while i < range.end {
            if self.birth[i] > y {
                i = self.subtree_end(i) + 1;
                continue;
            }
            if y < self.death[i] {
                out.push(i);
            }
            i += 1;
        }
    }

    /// First spindle of `range` alive at `y`.
    pub fn first_alive_in(&self, range: Range<usize>, y: f64) -> Option<usize> {
        let mut i = range.start;
        while i < range.end {
            if self.birth[i] > y {
                i = self.subtree_end(i) + 1;
                continue;
            }
            if y < self.death[i] {
                return Some(i);
            }
            i += 1;
        }
        None
    }

    /// First index `>= from` whose death exceeds `level`.
    pub fn first_death_above(&self, from: usize, level: f64) -> Option<usize> {
        (from..self.len()).find(|&i| self.death[i] > level)
    }

    /// Populations alive at level `y`, left to right.
    pub fn skewer_pops(&self, y: f64) -> Vec<u32> {
        let mut ids = Vec::new();
        self.alive_in(0..self.len(), y, &mut ids);
        ids.into_iter().map(|i| self.pop_at(i, y)).collect()
    }

    /// `max(death[j] for j >= i)` for every `i`, with a trailing `-inf`.
    pub fn suffix_max_death(&self) -> Vec<f64> {
        let mut out = vec![f64::NEG_INFINITY; self.len() + 1];
        for i in (0..self.len()).rev() {
            out[i] = out[i + 1].max(self.death[i]);
        }
        out
    }

    /// Level of extinction of the whole forest (`inf` if alive at the horizon).
    pub fn extinction_level(&self) -> f64 {
        self.death.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0)
    }
}

/// Roots for immigrant clades born at rate `1/2` per unit chain time on
/// `[from, to)`, ordered by decreasing birth level (latest leftmost).
pub fn immigrant_roots(from: f64, to: f64, scale: ForestScale, rng: &mut RngStream) -> Vec<RootSpec> {
    let mut births = Vec::new();
    let mut y = from;
    loop {
        y += 2.0 * scale.level_unit * rng.exp1();
        if y >= to {
            break;
        }
        births.push(y);
    }
    births.reverse();
    births.into_iter().map(|b| RootSpec { birth: b, pop: 1, kind: RootKind::Clade }).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JccpJump {
    /// Contour time, in level units.
    pub time: f64,
    pub level_before: f64,
    pub level_after: f64,
    pub spindle: usize,
}

/// Jumps of the contour process: drift −1 between jumps, one jump per
/// spindle from its birth to its death level (the horizon if censored).
pub fn to_jccp(forest: &SpindleForest) -> Vec<JccpJump> {
    let mut out = Vec::with_capacity(forest.len());
    let mut time = 0.0;
    let mut prev_top: Option<f64> = None;
    for i in 0..forest.len() {
        let b = forest.birth(i);
        if let Some(top) = prev_top {
            time += top - b;
        }
        let top = forest.death(i).min(forest.horizon());
        out.push(JccpJump { time, level_before: b, level_after: top, spindle: i });
        prev_top = Some(top);
    }
    out
}

/// Splitting tree of the Poissonized down-up `oCRP(1/2, θ)` started from
/// `initial`, in unscaled chain time, up to `horizon`.
pub fn build_splitting_tree(
    params: CrpParams,
    initial: &[u32],
    horizon: f64,
    rng: &mut RngStream,
) -> Result<SpindleForest, ChainError> {
    let mut roots = match params {
        CrpParams::HalfZero => Vec::new(),
        CrpParams::HalfHalf => immigrant_roots(0.0, horizon, ForestScale::UNIT, rng),
        CrpParams::HalfMinusHalf => return Err(ChainError::UnsupportedParams(-0.5)),
    };
    if initial.contains(&0) {
        return Err(ChainError::EmptyTable);
    }
    roots.extend(initial.iter().map(|&p| RootSpec { birth: 0.0, pop: p, kind: RootKind::Clade }));
    Ok(SpindleForest::simulate(&roots, ForestScale::UNIT, horizon, rng))
}

/// Configuration read off the splitting tree at level `y`.
pub fn discrete_skewer(forest: &SpindleForest, params: CrpParams, y: f64) -> CrpConfig {
    CrpConfig { tables: forest.skewer_pops(y), params }
}

/// `time,configuration` rows with populations joined by `;`.
pub fn trace_csv(rows: &[(f64, Vec<u32>)]) -> String {
    let mut s = String::from("time,configuration\n");
    for (t, c) in rows {
        let joined: Vec<String> = c.iter().map(|m| m.to_string()).collect();
        let _ = writeln!(s, "{t},{}", joined.join(";"));
    }
    s
}

/// All event levels of the forest, sorted, with the configurations just after each.
pub fn skewer_trace(forest: &SpindleForest, max_rows: usize) -> Vec<(f64, Vec<u32>)> {
    let mut levels: Vec<f64> = Vec::new();
    for i in 0..forest.len() {
        let (lv, _) = forest.events(i);
        levels.extend_from_slice(lv);
    }
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    levels.truncate(max_rows);
    levels.into_iter().map(|y| (y, forest.skewer_pops(y))).collect()
}
