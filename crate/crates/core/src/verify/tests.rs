use super::*;

fn small(name: &str) -> Params {
    match name {
        "two_tree_stationary" | "two_tree_mean" => Params::new().with("n", 16).with("u", 2),
        "type1_total_mass" | "type0_total_mass" => Params::new().with("n", 32),
        "scaffolding_bias" | "aldous_uniform" => Params::new(),
        "two_tree_lumpability" => Params::new().with("max_n", 4),
        "cross_construction" => Params::new().with("n", 32).with("first", "alternating").with("second", "clocking"),
        _ => Params::new().with("n", 32),
    }
}

#[test]
fn plan_covers_every_criterion_and_test() {
    let plan = battery_plan();
    for c in 1..=13 {
        assert!(plan.iter().any(|k| k.criterion == c), "criterion {c}");
    }
    for t in REGISTRY {
        assert!(plan.iter().any(|k| k.name == t.name), "{}", t.name);
    }
}

#[test]
fn every_registered_test_runs() {
    let b = Battery::new(3);
    for t in REGISTRY.iter().filter(|t| t.name != "scaffolding_bias") {
        let r = b.run(t.name, 40, &small(t.name)).unwrap_or_else(|e| panic!("{}: {e}", t.name));
        assert_eq!(r.pass, (r.statistic - r.reference).abs() <= r.tolerance, "{}", t.name);
        assert!(r.statistic.is_finite() && r.tolerance >= 0.0, "{}", t.name);
    }
}

#[test]
fn unknown_names_and_bad_params_are_errors() {
    assert_eq!(run_test("nope", 10, 1, &Params::new()), Err(VerifyError::UnknownTest("nope".into())));
    let p = Params::new().with("construction", "sideways");
    assert!(matches!(run_test("degeneration_prob", 10, 1, &p), Err(VerifyError::BadParam(_))));
    let p = Params::new().with("y", "abc");
    assert!(matches!(run_test("degeneration_prob", 10, 1, &p), Err(VerifyError::BadParam(_))));
}

#[test]
fn reports_are_reproducible() {
    let p = Params::new().with("n", 32).with("construction", "interweaving");
    let strip = |mut r: StatReport| {
        r.runtime_seconds = 0.0;
        r
    };
    let a = strip(run_test("degeneration_prob", 300, 9, &p).unwrap());
    let b = strip(run_test("degeneration_prob", 300, 9, &p).unwrap());
    assert_eq!(a, b);
    let c = strip(run_test("degeneration_prob", 300, 10, &p).unwrap());
    assert_ne!(a.statistic, c.statistic);
}

#[test]
fn shared_runs_match_fresh_runs() {
    let p = Params::new().with("n", 32);
    let b = Battery::new(4);
    b.run("survivor_label", 200, &p).unwrap();
    let shared = b.run("degeneration_prob", 200, &p).unwrap();
    let fresh = run_test("degeneration_prob", 200, 4, &p).unwrap();
    assert_eq!(shared.statistic, fresh.statistic);
}

#[test]
fn small_battery_tests_pass() {
    for name in ["d_metric_oracle", "metric_axioms", "aldous_uniform", "two_tree_lumpability"] {
        let r = run_test(name, 200, 7, &Params::new()).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.statistic, 0.0);
    }
    let r = run_test("overshoot_log_mean", 100_000, 7, &Params::new()).unwrap();
    assert!(r.pass && (r.tolerance - 3.0 * std::f64::consts::FRAC_PI_2 / 316.227_766).abs() < 1e-6, "{r:?}");
}

#[test]
fn report_json_round_trips() {
    let r = run_test("aldous_uniform", 0, 1, &Params::new().with("k", "v")).unwrap();
    let s = serde_json::to_string(&r).unwrap();
    assert!(s.contains("\"reference_source\":\"exact_oracle\"") && s.contains("\"params\":{\"k\":\"v\"}"));
    let back: StatReport = serde_json::from_str(&s).unwrap();
    assert_eq!(back, r);
}

#[test]
fn dequantize_spreads_lattice_values_only() {
    assert_eq!(dequantize(0.0, 8, 0.5), 0.0);
    assert_eq!(dequantize(3.0 / 8.0, 8, 0.5), 2.5 / 8.0);
    assert_eq!(dequantize(0.3, 8, 0.5), 0.3);
    assert!(dequantize(1.0 / 8.0, 8, 0.999) > 0.0);
}
