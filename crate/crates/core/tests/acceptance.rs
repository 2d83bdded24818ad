//! Acceptance suite: runs the full battery plan once and prints one
//! PASS/FAIL line per criterion. Pass/fail is recomputed here from pinned
//! sample sizes and tolerances rather than read from the reports.

use std::f64::consts::FRAC_PI_2;
use std::process::ExitCode;
use std::time::Instant;

use skewer_core::verify::{battery_plan, Battery, StatReport};

const SEED: u64 = 7;

const KS_Q99: f64 = 1.63;
const ALLOWANCE: f64 = 1.5;
const DEGENERATION_TOL: f64 = 0.02;
const SURVIVOR_TOL: f64 = 0.015;
const TWO_TREE_MEAN_TOL: f64 = 0.01;
const LOG_MEAN_TOL: f64 = 3.0 * FRAC_PI_2 * 1e-3;
const MEDIAN_TOL: f64 = 0.01;

const TITLES: [&str; 13] = [
    "total mass is BESQ(-1) for every construction",
    "degeneration probability (2yγ+1)^-2",
    "degeneration marginals",
    "pseudo-stationarity",
    "resampling 2-tree stationarity",
    "killed Wright-Fisher agreement",
    "non-accumulation arithmetic",
    "clock-level law a/(2G)",
    "type-1 and type-0 total mass",
    "BESQ additivity",
    "metric oracle",
    "discrete exactness",
    "construction cross-equivalence",
];

fn pinned_paths(name: &str) -> usize {
    match name {
        "two_tree_stationary" | "two_tree_mean" | "killed_wf" | "type1_total_mass" | "type0_total_mass" => 10_000,
        "overshoot_log_mean" | "overshoot_median" => 1_000_000,
        "clock_level_exact" | "clock_level_euler" => 50_000,
        "d_metric_oracle" | "metric_axioms" => 500,
        "scaffolding_bias" | "aldous_uniform" | "two_tree_lumpability" => 0,
        _ => 20_000,
    }
}

fn ks_one(n: usize) -> f64 {
    KS_Q99 / (n as f64).sqrt()
}

fn ks_two(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    KS_Q99 * ((n + m) / (n * m)).sqrt()
}

fn pinned_tolerance(r: &StatReport) -> f64 {
    let (n, m) = (r.n_samples, r.n_reference);
    match r.test_name.as_str() {
        "degeneration_mass" | "pseudo_stationary_ratio" | "pseudo_stationary_top" | "two_tree_stationary" | "type1_total_mass"
        | "type0_total_mass" => ALLOWANCE * ks_one(n),
        "clock_level_exact" => ks_one(n),
        "total_mass_besq" | "killed_wf" | "clock_level_euler" | "besq_additivity" | "cross_construction" => ALLOWANCE * ks_two(n, m),
        "degeneration_prob" => DEGENERATION_TOL,
        "survivor_label" => SURVIVOR_TOL,
        "two_tree_mean" => TWO_TREE_MEAN_TOL,
        "overshoot_log_mean" => LOG_MEAN_TOL,
        "overshoot_median" => MEDIAN_TOL,
        _ => 0.0,
    }
}

fn main() -> ExitCode {
    let battery = Battery::new(SEED);
    let mut ok = [true; 13];
    let start = Instant::now();
    for case in battery_plan() {
        let c = case.criterion as usize - 1;
        let params: Vec<String> = case.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let label = format!("[{:>2}] {} {}", case.criterion, case.name, params.join(","));
        if case.n_paths != pinned_paths(case.name) {
            println!("{label}: planned {} paths, pinned {}", case.n_paths, pinned_paths(case.name));
            ok[c] = false;
            continue;
        }
        match battery.run_case(&case) {
            Ok(r) => {
                let tol = pinned_tolerance(&r);
                let pass = (r.statistic - r.reference).abs() <= tol && (r.tolerance - tol).abs() <= 1e-12;
                ok[c] &= pass;
                println!(
                    "{label}: statistic {:.5} reference {:.5} tolerance {:.5} n {} ({:.1}s) {}{}",
                    r.statistic,
                    r.reference,
                    tol,
                    r.n_samples,
                    r.runtime_seconds,
                    if pass { "ok" } else { "FAIL" },
                    if r.detail.is_empty() { String::new() } else { format!(" [{}]", r.detail) },
                );
            }
            Err(e) => {
                println!("{label}: error {e}");
                ok[c] = false;
            }
        }
    }
    println!();
    for (i, title) in TITLES.iter().enumerate() {
        println!("criterion {:>2}: {} ({title})", i + 1, if ok[i] { "PASS" } else { "FAIL" });
    }
    println!("acceptance finished in {:.0}s", start.elapsed().as_secs_f64());
    if ok.iter().all(|&b| b) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
