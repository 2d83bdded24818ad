use proptest::prelude::*;
use skewer_core::chains::{
    poissonized_step, project_two_tree, two_tree_downup_step, uniform_tree, CrpConfig, CrpParams, TwoTreeOutcome,
};
use skewer_core::depoisson::depoissonize;
use skewer_core::ip::{concatenate, diversity_estimate, scale, IntervalPartition};
use skewer_core::kernels::{sample_besq_path, sample_pdip};
use skewer_core::metric::d_ip;
use skewer_core::rng::RngStream;
use skewer_core::scaffolding::sample_clade;
use skewer_core::type2::{run_construction, Construction, Type2Config};

fn masses() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01..1.0f64, 0..6)
}

fn annotated(seed: u64, blocks: usize) -> IntervalPartition {
    let mut rng = RngStream::new(seed, 0);
    let m: Vec<f64> = (0..blocks).map(|_| 0.05 + rng.uniform()).collect();
    IntervalPartition::from_masses(&m).unwrap().annotate(0.01)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn streams_replay(seed in any::<u64>(), id in any::<u64>()) {
        let (mut a, mut b) = (RngStream::new(seed, id), RngStream::new(seed, id));
        for _ in 0..16 {
            prop_assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn besq_paths_are_nonnegative_and_absorbed(x0 in 0.0..2.0f64, seed in any::<u64>()) {
        let p = sample_besq_path(x0, -1.0, 1e-3, 4.0, &mut RngStream::new(seed, 1)).unwrap();
        prop_assert_eq!(p.values[0], x0);
        prop_assert!(p.values.iter().all(|&v| v >= 0.0));
        for (&y, &v) in p.levels.iter().zip(&p.values) {
            if y >= p.lifetime {
                prop_assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn diversity_scales_by_root(m in masses(), c in 0.1..10.0f64, h in 1e-3..0.5f64) {
        let beta = IntervalPartition::from_masses(&m).unwrap();
        let lhs = diversity_estimate(&scale(c, &beta), c * h, None);
        let rhs = c.sqrt() * diversity_estimate(&beta, h, None);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
    }

    #[test]
    fn diversity_adds_under_concatenation(a in masses(), b in masses(), h in 1e-3..0.5f64) {
        let (a, b) = (IntervalPartition::from_masses(&a).unwrap(), IntervalPartition::from_masses(&b).unwrap());
        let whole = diversity_estimate(&concatenate(&a, &b), h, None);
        let parts = diversity_estimate(&a, h, None) + diversity_estimate(&b, h, None);
        prop_assert!((whole - parts).abs() <= 1e-9 * (1.0 + parts));
    }

    #[test]
    fn metric_triangle_and_identity(s in any::<u64>(), k in (0usize..4, 0usize..4, 0usize..4)) {
        let (a, b, c) = (annotated(s, k.0), annotated(s ^ 1, k.1), annotated(s ^ 2, k.2));
        prop_assert_eq!(d_ip(&a, &a).value, 0.0);
        let (ab, bc, ac) = (d_ip(&a, &b).value, d_ip(&b, &c).value, d_ip(&a, &c).value);
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert!((ab > 0.0) == (a != b));
    }

    #[test]
    fn two_tree_steps_conserve_mass(n in 3usize..40, seed in any::<u64>()) {
        let mut rng = RngStream::new(seed, 2);
        let tree = uniform_tree(n, &mut rng);
        let mut t = project_two_tree(&tree, tree.top()).unwrap();
        for _ in 0..50 {
            match two_tree_downup_step(&t, &mut rng).unwrap() {
                TwoTreeOutcome::Alive(next) => t = next,
                TwoTreeOutcome::Degenerate => break,
            }
            prop_assert!(t.m1 >= 1 && t.m2 >= 1 && t.spinal.iter().all(|&s| s >= 1));
            prop_assert_eq!(t.n() as usize, n);
        }
    }

    #[test]
    fn crp_tables_stay_occupied(pops in prop::collection::vec(1u32..5, 2..6), theta in prop::sample::select(vec![-0.5, 0.0, 0.5]), seed in any::<u64>()) {
        let mut c = CrpConfig::new(pops, CrpParams::from_theta(theta).unwrap()).unwrap();
        let mut rng = RngStream::new(seed, 3);
        for _ in 0..40 {
            let Ok((next, dt)) = poissonized_step(&c, &mut rng) else { break };
            prop_assert!(dt > 0.0);
            prop_assert!(next.tables.iter().all(|&p| p >= 1));
            prop_assert_eq!(next.customers(), next.tables.iter().map(|&p| p as u64).sum::<u64>());
            c = next;
        }
    }

    #[test]
    fn scaffolding_jumps_are_lifetimes(x0 in 0.05..1.0f64, seed in any::<u64>()) {
        let s = sample_clade(x0, 32, 2.0, &mut RngStream::new(seed, 4));
        let points = s.points();
        for w in points.windows(2) {
            prop_assert!(w[0].time < w[1].time);
        }
        for p in &points {
            let path = s.spindle_path(p.spindle);
            if path.lifetime.is_finite() {
                prop_assert!((p.level_after - p.level_before - path.lifetime).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn type2_paths_are_consistent(c in prop::sample::select(Construction::ALL.to_vec()), seed in any::<u64>()) {
        let cfg = Type2Config { n: 32, horizon: 1.0, ..Type2Config::default() };
        let mut rng = RngStream::new(seed, 5);
        let beta = scale(0.4, &sample_pdip(0.5, 32, &mut rng).unwrap());
        let run = run_construction(c, 0.3, 0.3, &beta, 1.0, &cfg, &mut rng).unwrap();
        let path = run.record(0.02);
        for w in path.clock_levels.windows(2) {
            prop_assert!(w[0] < w[1]);
        }
        for (st, &label) in path.states.iter().zip(&path.clock_index) {
            prop_assert!(st.m1 >= 0.0 && st.m2 >= 0.0);
            prop_assert!(label <= 2);
            if label == 0 {
                prop_assert!(st.is_dead() || st.total_mass() == 0.0);
            }
        }
        let dp = depoissonize(&path, 0.01).unwrap();
        for w in dp.rho.windows(2) {
            prop_assert!(w[0] < w[1]);
        }
        for st in &dp.states {
            prop_assert!((st.total_mass() - 1.0).abs() <= 1e-9);
        }
    }
}
