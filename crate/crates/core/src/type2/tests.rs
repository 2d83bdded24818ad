use rand::RngCore;

use super::clocking::{run_clocking, ClockingData};
use super::*;
use crate::chains::immigrant_roots;
use crate::kernels::{ks_threshold_two, ks_two_sample, sample_besq_path, DISCRETIZATION_ALLOWANCE};

fn cfg(n: u32, horizon: f64) -> Type2Config {
    Type2Config { n, horizon, ..Type2Config::default() }
}

fn ip(m: &[f64]) -> IntervalPartition {
    IntervalPartition::from_masses(m).unwrap()
}

#[test]
fn degenerate_start() {
    let c = cfg(64, 2.0);
    for (k, con) in [Construction::Alternating, Construction::Clocking].into_iter().enumerate() {
        let mut r = RngStream::new(1, k as u64);
        for _ in 0..20 {
            let run = run_construction(con, 0.5, 0.0, &IntervalPartition::empty(), 1.0, &c, &mut r).unwrap();
            let d = run.degeneration().unwrap();
            assert_eq!(d.level, 0.0);
            assert_eq!(d.survivor, 1);
            assert!((d.mass - 0.5).abs() <= 1.0 / 64.0);
            assert_eq!(run.stage_count(), 1);
            for y in [0.05, 0.2] {
                let s = run.state_at(y);
                assert_eq!(s.m2, 0.0);
                assert!(s.alpha.is_empty());
            }
        }
    }
}

#[test]
fn dead_start_is_absorbing() {
    let mut r = RngStream::new(2, 0);
    let c = cfg(64, 1.0);
    for con in [Construction::Alternating, Construction::Clocking] {
        let run = run_construction(con, 0.0, 0.0, &IntervalPartition::empty(), 1.0, &c, &mut r).unwrap();
        assert_eq!(run.lifetime(), 0.0);
        assert!(run.state_at(0.5).is_dead());
        assert!(run.record(0.1).states.iter().all(Type2State::is_dead));
    }
}

#[test]
fn invalid_inputs_rejected() {
    let mut r = RngStream::new(3, 0);
    let c = cfg(64, 1.0);
    let e = IntervalPartition::empty();
    assert!(type2_alternating(-1.0, 1.0, &e, &c, &mut r).is_err());
    assert!(type2_deletion_clocking(0.0, 0.0, &ip(&[0.2]), &c, &mut r).is_err());
    assert!(type2_interweaving(1.0, 1.0, 0.0, &c, &mut r).is_err());
    assert!(type2_alternating(1.0, 1.0, &e, &cfg(0, 1.0), &mut r).is_err());
    assert!(Type2State::new(0.0, 0.0, ip(&[0.1])).is_err());
    assert_eq!("clocking".parse::<Construction>(), Ok(Construction::Clocking));
}

fn check_structure(run: &Type2Run) {
    let n = run.n() as f64;
    let h = run.horizon();
    for (s, st) in run.stages.iter().enumerate() {
        assert_eq!(st.label, if s % 2 == 0 { 1 } else { 2 });
        if s > 0 {
            assert_eq!(st.start, run.stages[s - 1].end);
        }
        if st.end < h && st.end > st.start {
            let y = st.end - 1e-9;
            assert!(run.clock_value(s, y) <= 1.0 / n + 1e-6, "clock mass {} before its death", run.clock_value(s, y));
            let before = run.total_mass_at(y);
            let after = run.total_mass_at(st.end);
            assert!((before - after).abs() <= 1.0 / n + 1e-6, "jump {before} -> {after} at {}", st.end);
        }
    }
    if let Some(d) = run.degeneration() {
        let mut y = d.level;
        while y <= h.min(run.lifetime()) && y < run.lifetime() {
            let st = run.state_at(y);
            assert!(st.alpha.is_empty(), "α not empty after D");
            assert!((st.m1 > 0.0) != (st.m2 > 0.0), "tops after D: {st:?}");
            y += 0.013;
        }
    }
    for k in 0..20 {
        let y = k as f64 * h / 20.0;
        let st = run.state_at(y);
        if !st.is_dead() {
            assert!(st.m1 + st.m2 > 0.0);
        }
    }
}

#[test]
fn stage_structure_all_constructions() {
    let c = cfg(64, 1.5);
    let beta = ip(&[0.2, 0.1, 0.3]);
    for (k, con) in Construction::ALL.into_iter().enumerate() {
        let mut r = RngStream::new(4, k as u64);
        for _ in 0..30 {
            let run = run_construction(con, 0.4, 0.3, &beta, 1.0, &c, &mut r).unwrap();
            check_structure(&run);
        }
    }
}

#[test]
fn interweaving_degeneration_is_min_of_lifetimes() {
    let c = cfg(64, 1.0);
    let mut r = RngStream::new(5, 0);
    let mut seen = 0;
    for _ in 0..200 {
        let run = type2_interweaving(0.5, 0.5, 1.0, &c, &mut r).unwrap();
        let z1 = run.forests[0].extinction_level();
        let z2 = run.forests[1].extinction_level();
        let d = run.degeneration().unwrap();
        assert_eq!(d.level, z1.min(z2));
        // The first clock change falls on the second list exactly when its
        // first spindle outlives the first.
        if run.stage_count() > 1 {
            let t1_is_f2 = run.stages[1].clock == ClockRef::Spindle { forest: 1, idx: 0 };
            assert_eq!(t1_is_f2, run.forests[1].death(0) > run.forests[0].death(0));
            seen += t1_is_f2 as usize;
        }
    }
    assert!(seen > 0);
}

#[test]
fn clocking_symmetry_is_pathwise() {
    let c = Type2Config { n: 32, horizon: 50.0, max_horizon: 50.0, ..Type2Config::default() };
    let mut r = RngStream::new(6, 0);
    let mut compared = 0;
    for _ in 0..40 {
        let clock = (7 + r.below(10) as u32, r.next_u64());
        let host = (3 + r.below(10) as u32, r.next_u64());
        let beta: Vec<(u32, u64)> = (0..3).map(|_| (1 + r.below(6) as u32, r.next_u64())).collect();
        let descent = immigrant_roots(0.0, 50.0, c.scale(), &mut r).into_iter().map(|x| (x.birth, r.next_u64())).collect();
        let a = ClockingData { clock, host, descent, beta };
        let b = ClockingData { clock: a.host, host: a.clock, ..a.clone() };
        let ra = run_clocking(&a, false, &c);
        let rb = run_clocking(&b, true, &c);
        if !ra.lifetime().is_finite() {
            continue;
        }
        compared += 1;
        assert_eq!(ra.lifetime(), rb.lifetime());
        let mut la = ra.clock_levels();
        la.push(ra.forests[1].death(0));
        la.push(rb.forests[1].death(0));
        let mut lb = rb.clock_levels();
        lb.push(ra.forests[1].death(0));
        lb.push(rb.forests[1].death(0));
        for v in [&mut la, &mut lb] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        assert_eq!(la, lb);
        let mut grid: Vec<f64> = (0..200).map(|k| k as f64 * ra.lifetime() / 200.0).collect();
        grid.extend(ra.clock_levels());
        for y in grid {
            assert_eq!(ra.state_at(y), rb.state_at(y), "y={y}");
        }
        assert_eq!(ra.degeneration(), rb.degeneration());
    }
    assert!(compared > 20);
}

#[test]
fn total_mass_matches_besq_minus_one() {
    let c = cfg(64, 0.3);
    let reps = 1500;
    let y = 0.25;
    let mut r = RngStream::new(7, 0);
    let reference: Vec<f64> = (0..reps).map(|_| sample_besq_path(1.0, -1.0, 1e-3, y, &mut r).unwrap().value_at(y)).collect();
    let beta = ip(&[0.1, 0.2]);
    for (k, con) in [Construction::Alternating, Construction::Clocking].into_iter().enumerate() {
        let mut r = RngStream::new(7, 1 + k as u64);
        let sim: Vec<f64> = (0..reps).map(|_| run_construction(con, 0.4, 0.3, &beta, 1.0, &c, &mut r).unwrap().total_mass_at(y)).collect();
        let d = ks_two_sample(&sim, &reference).unwrap();
        assert!(d < DISCRETIZATION_ALLOWANCE * ks_threshold_two(reps, reps), "{con:?}: {d}");
    }
}

#[test]
fn lattice_restart_keeps_labels() {
    let c = cfg(64, 1.0);
    let mut r = RngStream::new(8, 0);
    let run = type2_deletion_clocking(0.6, 0.5, &ip(&[0.2]), &c, &mut r).unwrap();
    let y = 0.1;
    if let Some((label, init)) = run.lattice_state_at(y) {
        let st = run.state_at(y);
        let (clock, other) = if label == 1 { (st.m1, st.m2) } else { (st.m2, st.m1) };
        assert_eq!(init.a as f64 / 64.0, clock);
        assert_eq!(init.b as f64 / 64.0, other);
        let next = clocking_from_lattice(&init, label == 2, &c, &mut r).unwrap();
        assert_eq!(next.state_at(0.0), st);
    }
}

#[test]
fn record_and_csv() {
    let c = cfg(64, 0.5);
    let mut r = RngStream::new(9, 0);
    let run = type2_deletion_clocking(0.5, 0.5, &ip(&[0.25]), &c, &mut r).unwrap();
    let p = run.record(0.1);
    assert!(p.levels.windows(2).all(|w| w[0] < w[1]));
    for y in run.clock_levels().into_iter().filter(|&y| y <= 0.5) {
        assert!(p.levels.contains(&y));
    }
    let rows = p.csv_rows(3);
    assert_eq!(rows.lines().count(), p.levels.len());
    assert_eq!(rows.lines().next().unwrap().split(',').count(), PATH_CSV_HEADER.split(',').count());
    assert!(rows.starts_with("3,0,"));
    assert_eq!(total_mass(&p).len(), p.levels.len());
}

#[test]
fn mass_on_grid_matches_states() {
    let c = cfg(64, 0.8);
    let beta = ip(&[0.2, 0.1, 0.3]);
    let grid: Vec<f64> = (0..=200).map(|j| j as f64 * 0.004).collect();
    for (k, con) in [Construction::Clocking, Construction::Interweaving].into_iter().enumerate() {
        let mut r = RngStream::new(10, k as u64);
        for _ in 0..20 {
            let run = run_construction(con, 0.4, 0.3, &beta, 1.0, &c, &mut r).unwrap();
            let masses = run.mass_on_grid(&grid).unwrap();
            for (&y, &m) in grid.iter().zip(&masses) {
                let want = run.total_mass_at(y);
                assert!((m - want).abs() < 1e-9, "{con:?} y={y}: {m} vs {want}");
            }
        }
    }
    let mut r = RngStream::new(10, 9);
    let run = type2_alternating(0.4, 0.3, &beta, &c, &mut r).unwrap();
    assert!(run.mass_on_grid(&grid).is_none());
}
