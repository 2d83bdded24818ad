//! Marked point measures of spindles at lattice scale `1/n`.
//!
//! A measure is a [`SpindleForest`] of birth–death spindles read through
//! its contour process: one jump per spindle, from its birth level to its
//! death level. Chain time is scaled by `(2n)^{-3/2}` into scaffolding time,
//! levels by `1/(2n)` and populations by `1/n`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::chains::{immigrant_roots, to_jccp, ForestScale, RootKind, RootSpec, SpindleForest};
use crate::ip::{concatenate, IntervalPartition};
use crate::rng::RngStream;

/// Unbiased integer rounding of `x * n`.
pub fn lattice_pop(x: f64, n: u32, rng: &mut RngStream) -> u32 {
    assert!(x >= 0.0 && x.is_finite(), "mass must be finite and nonnegative");
    let v = x * n as f64;
    let fl = v.floor();
    let up = rng.bernoulli(v - fl);
    fl as u32 + up as u32
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaffoldPoint {
    pub time: f64,
    pub level_before: f64,
    pub level_after: f64,
    pub spindle: usize,
}

/// One spindle as a step function of level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpindlePath {
    pub birth: f64,
    /// `f64::INFINITY` when censored at the horizon.
    pub lifetime: f64,
    /// `(level, width)` at every event, starting at the birth.
    pub steps: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct MarkedScaffolding {
    forest: SpindleForest,
    n: u32,
}

impl MarkedScaffolding {
    pub fn from_forest(forest: SpindleForest, n: u32) -> Self {
        Self { forest, n }
    }

    pub fn forest(&self) -> &SpindleForest {
        &self.forest
    }

    pub fn into_forest(self) -> SpindleForest {
        self.forest
    }

    pub fn scale_unit(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.forest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forest.is_empty()
    }

    /// Scaffolding time per unit of contour time measured in levels.
    pub fn time_factor(&self) -> f64 {
        1.0 / (2.0 * self.n as f64).sqrt()
    }

    pub fn points(&self) -> Vec<ScaffoldPoint> {
        let c = self.time_factor();
        to_jccp(&self.forest)
            .into_iter()
            .map(|j| ScaffoldPoint { time: j.time * c, level_before: j.level_before, level_after: j.level_after, spindle: j.spindle })
            .collect()
    }

    pub fn spindle_path(&self, i: usize) -> SpindlePath {
        let f = &self.forest;
        let u = f.scale().mass_unit;
        let (lv, pp) = f.events(i);
        SpindlePath {
            birth: f.birth(i),
            lifetime: f.death(i) - f.birth(i),
            steps: lv.iter().zip(pp).map(|(&l, &p)| (l, p as f64 * u)).collect(),
        }
    }

    /// Highest level reached (the horizon if some spindle is censored).
    pub fn max_level(&self) -> f64 {
        self.forest.extinction_level().min(self.forest.horizon())
    }

    pub fn skewer(&self, y: f64) -> IntervalPartition {
        let u = self.forest.scale().mass_unit;
        let masses: Vec<f64> = self.forest.skewer_pops(y).into_iter().map(|p| p as f64 * u).collect();
        IntervalPartition::from_masses(&masses).expect("alive spindles have positive mass")
    }

    /// Mass at level `y` of the spindles at scaffolding times `<= t`.
    pub fn aggregate_mass(&self, y: f64, t: f64) -> f64 {
        self.points().iter().take_while(|p| p.time <= t).map(|p| self.forest.mass_at(p.spindle, y)).sum()
    }

    /// `time,level_before,level_after,spindle_id`
    pub fn dump_csv(&self) -> String {
        let mut s = String::from("time,level_before,level_after,spindle_id\n");
        for p in self.points() {
            let _ = writeln!(s, "{},{},{},{}", p.time, p.level_before, p.level_after, p.spindle);
        }
        s
    }

    /// `spindle_id,level,width` for every event of every spindle.
    pub fn spindle_csv(&self) -> String {
        let mut s = String::from("spindle_id,level,width\n");
        for i in 0..self.len() {
            for (l, w) in self.spindle_path(i).steps {
                let _ = writeln!(s, "{i},{l},{w}");
            }
        }
        s
    }
}

fn clade_roots(pops: &[u32]) -> Vec<RootSpec> {
    pops.iter().filter(|&&p| p > 0).map(|&p| RootSpec { birth: 0.0, pop: p, kind: RootKind::Clade }).collect()
}

pub fn sample_clade(x0: f64, n: u32, horizon: f64, rng: &mut RngStream) -> MarkedScaffolding {
    let pop = lattice_pop(x0, n, rng);
    let forest = SpindleForest::simulate(&clade_roots(&[pop]), ForestScale::discrete(n), horizon, rng);
    MarkedScaffolding { forest, n }
}

/// Clades with the given initial populations, concatenated left to right.
pub fn sample_type1_pops(pops: &[u32], n: u32, horizon: f64, rng: &mut RngStream) -> MarkedScaffolding {
    let forest = SpindleForest::simulate(&clade_roots(pops), ForestScale::discrete(n), horizon, rng);
    MarkedScaffolding { forest, n }
}

pub fn sample_type1_measure(beta: &IntervalPartition, n: u32, horizon: f64, rng: &mut RngStream) -> MarkedScaffolding {
    let pops: Vec<u32> = beta.masses().map(|m| lattice_pop(m, n, rng)).collect();
    sample_type1_pops(&pops, n, horizon, rng)
}

/// Immigrant clades (left) followed by the clades of `β` (right).
#[derive(Clone, Debug)]
pub struct Type0Data {
    pub left: MarkedScaffolding,
    pub right: MarkedScaffolding,
    pub depth_cutoff: f64,
}

impl Type0Data {
    pub fn skewer(&self, y: f64) -> IntervalPartition {
        assert!(y < self.depth_cutoff, "level {y} beyond the immigration cutoff");
        concatenate(&self.left.skewer(y), &self.right.skewer(y))
    }

    pub fn total_mass(&self, y: f64) -> f64 {
        self.skewer(y).total_mass()
    }
}

/// Immigration is generated only below `depth_cutoff`, so the skewer is
/// exact for levels under it.
pub fn sample_type0_data(beta: &IntervalPartition, n: u32, depth_cutoff: f64, rng: &mut RngStream) -> Type0Data {
    let sc = ForestScale::discrete(n);
    let roots = immigrant_roots(0.0, depth_cutoff, sc, rng);
    let left = MarkedScaffolding { forest: SpindleForest::simulate(&roots, sc, depth_cutoff, rng), n };
    let right = sample_type1_measure(beta, n, depth_cutoff, rng);
    Type0Data { left, right, depth_cutoff }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrmPoint {
    pub time: f64,
    pub lifetime: f64,
    pub shape: Vec<(f64, f64)>,
}

/// Spindles with lifetime above `z` from the Stable(3/2) Lévy measure,
/// with the compensated scaffolding path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrmScaffolding {
    pub z: f64,
    pub horizon: f64,
    pub points: Vec<PrmPoint>,
}

/// Rate of spindles with lifetime above `z`.
pub fn prm_rate(z: f64) -> f64 {
    z.powf(-1.5) / (PI * SQRT_2)
}

impl PrmScaffolding {
    /// Compensation drift of the truncated jump sum.
    pub fn compensation_rate(&self) -> f64 {
        3.0 / (self.z.sqrt() * PI * SQRT_2)
    }

    pub fn path_at(&self, t: f64) -> f64 {
        let jumps: f64 = self.points.iter().take_while(|p| p.time <= t).map(|p| p.lifetime).sum();
        jumps - self.compensation_rate() * t
    }
}

/// `shape(lifetime, rng)` supplies the `(level, width)` profile of each spindle.
pub fn prm_truncated_mode(
    z: f64,
    horizon: f64,
    rng: &mut RngStream,
    mut shape: impl FnMut(f64, &mut RngStream) -> Vec<(f64, f64)>,
) -> PrmScaffolding {
    assert!(z > 0.0, "threshold must be positive");
    let rate = prm_rate(z);
    let mut points = Vec::new();
    let mut t = 0.0;
    loop {
        t += rng.exp1() / rate;
        if t >= horizon {
            break;
        }
        let lifetime = z * rng.uniform_open().powf(-2.0 / 3.0);
        let shape = shape(lifetime, rng);
        points.push(PrmPoint { time: t, lifetime, shape });
    }
    PrmScaffolding { z, horizon, points }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{besq_marginal_exact, ks_statistic, ks_threshold_one, ks_threshold_two, ks_two_sample, DISCRETIZATION_ALLOWANCE};

    #[test]
    fn empty_clade_and_measure() {
        let mut r = RngStream::new(1, 0);
        assert!(sample_clade(0.0, 64, 1.0, &mut r).is_empty());
        assert!(sample_type1_measure(&IntervalPartition::empty(), 64, 1.0, &mut r).is_empty());
    }

    #[test]
    fn lattice_rounding_is_unbiased() {
        let mut r = RngStream::new(2, 0);
        let reps = 40_000;
        let mean = (0..reps).map(|_| lattice_pop(0.3, 10, &mut r) as f64).sum::<f64>() / reps as f64;
        assert!((mean - 3.0).abs() < 0.02);
        let small = (0..reps).filter(|_| lattice_pop(0.004, 100, &mut r) == 1).count() as f64 / reps as f64;
        assert!((small - 0.4).abs() < 0.02);
    }

    #[test]
    fn clade_skewer_identities() {
        let mut r = RngStream::new(3, 0);
        for _ in 0..20 {
            let c = sample_clade(0.7, 128, 4.0, &mut r);
            let s0 = c.skewer(0.0);
            assert_eq!(s0.len(), 1);
            assert!((s0.total_mass() - 0.7).abs() <= 1.0 / 128.0);
            let f = c.spindle_path(0);
            for y in [0.01, 0.1, 0.3, 0.6] {
                let s = c.skewer(y);
                let direct: f64 = (0..c.len()).map(|i| c.forest().mass_at(i, y)).sum();
                assert!((s.total_mass() - direct).abs() < 1e-12);
                assert!((s.total_mass() - c.aggregate_mass(y, f64::INFINITY)).abs() < 1e-12);
                if y < f.lifetime {
                    assert_eq!(s.masses().next().unwrap(), c.forest().mass_at(0, y));
                }
            }
            if c.max_level() < 3.0 {
                assert!(c.skewer(c.max_level() + 1.0).is_empty());
            }
        }
    }

    #[test]
    fn points_increase_and_jumps_are_lifetimes() {
        let mut r = RngStream::new(4, 0);
        let beta = IntervalPartition::from_masses(&[0.3, 0.5, 0.2]).unwrap();
        let m = sample_type1_measure(&beta, 64, f64::INFINITY, &mut r);
        let pts = m.points();
        for w in pts.windows(2) {
            assert!(w[1].time > w[0].time);
        }
        for p in &pts {
            assert_eq!(p.level_after - p.level_before, m.spindle_path(p.spindle).lifetime);
        }
        // Absorbed at the empty partition in finite time.
        assert!(m.max_level().is_finite());
    }

    #[test]
    fn clade_total_mass_is_besq0() {
        let mut r = RngStream::new(5, 0);
        let reps = 3000;
        let sim: Vec<f64> = (0..reps).map(|_| sample_clade(1.0, 64, 0.6, &mut r).skewer(0.5).total_mass()).collect();
        let exact: Vec<f64> = (0..reps).map(|_| besq_marginal_exact(1.0, 0.0, 0.5, &mut r).unwrap()).collect();
        let d = ks_two_sample(&sim, &exact).unwrap();
        assert!(d < DISCRETIZATION_ALLOWANCE * ks_threshold_two(reps, reps), "{d}");
    }

    #[test]
    fn type0_total_mass_is_besq1() {
        let mut r = RngStream::new(6, 0);
        let reps = 2000;
        let beta = IntervalPartition::from_masses(&[0.25, 0.5]).unwrap();
        let sim: Vec<f64> = (0..reps).map(|_| sample_type0_data(&beta, 64, 0.6, &mut r).total_mass(0.5)).collect();
        let exact: Vec<f64> = (0..reps).map(|_| besq_marginal_exact(0.75, 1.0, 0.5, &mut r).unwrap()).collect();
        let d = ks_two_sample(&sim, &exact).unwrap();
        assert!(d < DISCRETIZATION_ALLOWANCE * ks_threshold_two(reps, reps), "{d}");
    }

    #[test]
    fn clade_scaling() {
        // Masses and levels of a clade of mass 1/2, doubled, match a clade of mass 1.
        let mut r = RngStream::new(7, 0);
        let reps = 3000;
        let small: Vec<f64> = (0..reps).map(|_| 2.0 * sample_clade(0.5, 128, 0.3, &mut r).skewer(0.25).total_mass()).collect();
        let big: Vec<f64> = (0..reps).map(|_| sample_clade(1.0, 64, 0.6, &mut r).skewer(0.5).total_mass()).collect();
        let d = ks_two_sample(&small, &big).unwrap();
        assert!(d < DISCRETIZATION_ALLOWANCE * ks_threshold_two(reps, reps), "{d}");
    }

    #[test]
    fn type0_immigrants_sit_left() {
        let mut r = RngStream::new(8, 0);
        let beta = IntervalPartition::from_masses(&[0.5]).unwrap();
        let d = sample_type0_data(&beta, 64, 0.4, &mut r);
        let y = 0.2;
        let s = d.skewer(y);
        assert_eq!(s.len(), d.left.skewer(y).len() + d.right.skewer(y).len());
        for w in d.left.forest().roots().windows(2) {
            assert!(d.left.forest().birth(w[0] as usize) > d.left.forest().birth(w[1] as usize));
        }
    }

    #[test]
    fn prm_rate_and_lifetimes() {
        assert!((prm_rate(1.0) - 0.2251).abs() < 1e-4);
        let mut r = RngStream::new(9, 0);
        assert!(prm_truncated_mode(1.0, 0.0, &mut r, |_, _| Vec::new()).points.is_empty());
        let horizon = 40_000.0;
        let p = prm_truncated_mode(1.0, horizon, &mut r, |_, _| Vec::new());
        let expected = prm_rate(1.0) * horizon;
        assert!((p.points.len() as f64 - expected).abs() < 4.0 * expected.sqrt());
        let lifetimes: Vec<f64> = p.points.iter().map(|q| q.lifetime).collect();
        let d = ks_statistic(&lifetimes, |u| if u <= 1.0 { 0.0 } else { 1.0 - u.powf(-1.5) }).unwrap();
        assert!(d < ks_threshold_one(lifetimes.len()));
        let t = p.points[10].time;
        let jumps: f64 = p.points[..=10].iter().map(|q| q.lifetime).sum();
        assert!((p.path_at(t) - (jumps - 3.0 * t / (PI * SQRT_2))).abs() < 1e-9);
    }

    #[test]
    fn dump_formats() {
        let mut r = RngStream::new(10, 0);
        let c = sample_clade(0.05, 64, 1.0, &mut r);
        let d = c.dump_csv();
        assert!(d.starts_with("time,level_before,level_after,spindle_id\n"));
        assert_eq!(d.lines().count(), c.len() + 1);
        assert!(c.spindle_csv().starts_with("spindle_id,level,width\n"));
    }
}
