//! Verification battery: every law checked by Monte Carlo or exact
//! computation is a named test returning a [`StatReport`].

mod battery;
pub mod lattice_laws;
pub mod samples;

use std::any::Any;
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use samples::dequantize;

#[derive(Debug, Error, PartialEq)]
pub enum VerifyError {
    #[error("unknown test {0:?}")]
    UnknownTest(String),
    #[error("bad parameter: {0}")]
    BadParam(String),
    #[error("simulation failed: {0}")]
    Simulation(String),
}

/// Where the reference value of a report comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// A closed-form value or CDF.
    ClosedForm,
    /// An exact computation such as enumeration.
    ExactOracle,
    /// An independently simulated reference sample.
    Simulated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub test_name: String,
    pub params: Params,
    pub statistic: f64,
    pub n_samples: usize,
    /// Size of the reference sample of a two-sample comparison, else 0.
    pub n_reference: usize,
    pub reference: f64,
    pub reference_source: Source,
    pub tolerance: f64,
    pub pass: bool,
    pub runtime_seconds: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

/// Outcome of a test body before timing and naming.
#[derive(Clone, Debug)]
pub(crate) struct Outcome {
    statistic: f64,
    n_samples: usize,
    n_reference: usize,
    reference: f64,
    source: Source,
    tolerance: f64,
    detail: String,
}

impl Outcome {
    /// KS distance compared against `threshold`.
    fn ks(statistic: f64, n_samples: usize, source: Source, threshold: f64) -> Self {
        Self { statistic, n_samples, n_reference: 0, reference: 0.0, source, tolerance: threshold, detail: String::new() }
    }

    fn close(statistic: f64, n_samples: usize, reference: f64, source: Source, tolerance: f64) -> Self {
        Self { statistic, n_samples, n_reference: 0, reference, source, tolerance, detail: String::new() }
    }

    fn against(mut self, n_reference: usize) -> Self {
        self.n_reference = n_reference;
        self
    }

    fn with_detail(mut self, detail: String) -> Self {
        self.detail = detail;
        self
    }

    fn passes(&self) -> bool {
        (self.statistic - self.reference).abs() <= self.tolerance
    }
}

/// Flat string parameters with typed accessors.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Params(BTreeMap<String, String>);

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.0.insert(key.to_string(), value.to_string());
        self
    }

    pub fn insert(&mut self, key: &str, value: impl ToString) {
        self.0.insert(key.to_string(), value.to_string());
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &String)> {
        self.0.iter()
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.0.get(key).map_or(default, String::as_str)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, VerifyError> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| VerifyError::BadParam(format!("{key}={v} is not a number"))),
        }
    }

    pub fn u32_or(&self, key: &str, default: u32) -> Result<u32, VerifyError> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| VerifyError::BadParam(format!("{key}={v} is not a count"))),
        }
    }
}

/// A registered test and the acceptance criterion it belongs to.
#[derive(Clone, Copy, Debug)]
pub struct TestSpec {
    pub name: &'static str,
    pub criterion: u8,
    pub default_paths: usize,
    pub summary: &'static str,
}

pub const REGISTRY: &[TestSpec] = &[
    TestSpec { name: "total_mass_besq", criterion: 1, default_paths: 20_000, summary: "total mass at y vs directly simulated BESQ(-1)" },
    TestSpec { name: "degeneration_prob", criterion: 2, default_paths: 20_000, summary: "P(D > y) vs (2yγ+1)^-2" },
    TestSpec { name: "survivor_label", criterion: 3, default_paths: 20_000, summary: "frequency of label 1 surviving" },
    TestSpec { name: "degeneration_mass", criterion: 3, default_paths: 20_000, summary: "M_D given D near y vs Gamma(1/2, γ/(2Dγ+1))" },
    TestSpec { name: "pseudo_stationary_ratio", criterion: 4, default_paths: 20_000, summary: "m1/M given D > y vs Beta(1/2, 1)" },
    TestSpec { name: "pseudo_stationary_top", criterion: 4, default_paths: 20_000, summary: "m1 given D > y vs Gamma(1/2, γ/(2yγ+1))" },
    TestSpec { name: "two_tree_stationary", criterion: 5, default_paths: 10_000, summary: "2-tree coordinate at u vs Beta(1/2, 1)" },
    TestSpec { name: "two_tree_mean", criterion: 5, default_paths: 10_000, summary: "2-tree coordinate mean at u vs 1/3" },
    TestSpec { name: "killed_wf", criterion: 6, default_paths: 10_000, summary: "projected killed evolution vs independent-BESQ reference" },
    TestSpec { name: "overshoot_log_mean", criterion: 7, default_paths: 1_000_000, summary: "mean log overshoot ratio vs 0" },
    TestSpec { name: "overshoot_median", criterion: 7, default_paths: 1_000_000, summary: "median overshoot ratio vs 1" },
    TestSpec { name: "clock_level_exact", criterion: 8, default_paths: 50_000, summary: "exact clock levels vs the a/(2G) CDF" },
    TestSpec { name: "clock_level_euler", criterion: 8, default_paths: 50_000, summary: "Euler BESQ(-1) hitting times vs exact draws" },
    TestSpec { name: "type1_total_mass", criterion: 9, default_paths: 10_000, summary: "type-1 total mass at y vs BESQ(0)" },
    TestSpec { name: "type0_total_mass", criterion: 9, default_paths: 10_000, summary: "type-0 total mass at y vs BESQ(1)" },
    TestSpec { name: "scaffolding_bias", criterion: 9, default_paths: 0, summary: "lattice bias decreases through n = 64, 128, 256" },
    TestSpec { name: "besq_additivity", criterion: 10, default_paths: 20_000, summary: "composed BESQ path vs direct BESQ_{a+b}(-1)" },
    TestSpec { name: "d_metric_oracle", criterion: 11, default_paths: 500, summary: "exact d_I vs exhaustive correspondences" },
    TestSpec { name: "metric_axioms", criterion: 11, default_paths: 500, summary: "symmetry and triangle inequality of d_I" },
    TestSpec { name: "aldous_uniform", criterion: 12, default_paths: 0, summary: "uniform law is stationary for n = 3, 4" },
    TestSpec { name: "two_tree_lumpability", criterion: 12, default_paths: 0, summary: "projected chain matches the 2-tree chain for n <= 6" },
    TestSpec { name: "cross_construction", criterion: 13, default_paths: 20_000, summary: "pairwise construction marginals at y" },
];

pub fn lookup(name: &str) -> Option<&'static TestSpec> {
    REGISTRY.iter().find(|t| t.name == name)
}

/// One parameterized test run of the full battery.
#[derive(Clone, Debug)]
pub struct Case {
    pub criterion: u8,
    pub name: &'static str,
    pub n_paths: usize,
    pub params: Params,
}

/// Every case needed to decide all acceptance criteria.
pub fn battery_plan() -> Vec<Case> {
    let case = |name: &'static str, params: Params| {
        let spec = lookup(name).expect("registered");
        Case { criterion: spec.criterion, name, n_paths: spec.default_paths, params }
    };
    let constructions = ["alternating", "clocking", "interweaving"];
    let mut plan = Vec::new();
    for c in constructions {
        plan.push(case("total_mass_besq", Params::new().with("construction", c)));
    }
    for c in constructions {
        for y in [0.25, 0.5, 1.0] {
            plan.push(case("degeneration_prob", Params::new().with("construction", c).with("y", y)));
        }
    }
    for name in ["survivor_label", "degeneration_mass", "pseudo_stationary_ratio", "pseudo_stationary_top"] {
        for c in constructions {
            plan.push(case(name, Params::new().with("construction", c)));
        }
    }
    for u in [2, 4, 8] {
        plan.push(case("two_tree_stationary", Params::new().with("u", u)));
        for coord in 1..=3 {
            plan.push(case("two_tree_mean", Params::new().with("u", u).with("coord", coord)));
        }
    }
    for coord in 1..=2 {
        plan.push(case("killed_wf", Params::new().with("coord", coord)));
    }
    for name in ["overshoot_log_mean", "overshoot_median", "clock_level_exact", "clock_level_euler"] {
        plan.push(case(name, Params::new()));
    }
    for name in ["type1_total_mass", "type0_total_mass", "scaffolding_bias"] {
        plan.push(case(name, Params::new()));
    }
    for obs in ["marginal", "lifetime"] {
        plan.push(case("besq_additivity", Params::new().with("observable", obs)));
    }
    for name in ["d_metric_oracle", "metric_axioms", "aldous_uniform", "two_tree_lumpability"] {
        plan.push(case(name, Params::new()));
    }
    for (i, a) in constructions.iter().enumerate() {
        for b in &constructions[i + 1..] {
            for coord in ["m1", "m2", "alpha"] {
                plan.push(case("cross_construction", Params::new().with("first", a).with("second", b).with("coord", coord)));
            }
        }
    }
    plan
}

/// Runs tests under one seed, sharing path ensembles between tests that
/// read the same runs.
pub struct Battery {
    seed: u64,
    cache: Mutex<HashMap<String, Arc<dyn Any + Send + Sync>>>,
}

impl Battery {
    pub fn new(seed: u64) -> Self {
        Self { seed, cache: Mutex::new(HashMap::new()) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn run(&self, name: &str, n_paths: usize, params: &Params) -> Result<StatReport, VerifyError> {
        let start = Instant::now();
        let out = self.dispatch(name, n_paths, params)?;
        Ok(StatReport {
            test_name: name.to_string(),
            params: params.clone(),
            statistic: out.statistic,
            n_samples: out.n_samples,
            n_reference: out.n_reference,
            reference: out.reference,
            reference_source: out.source,
            tolerance: out.tolerance,
            pass: out.passes(),
            runtime_seconds: start.elapsed().as_secs_f64(),
            detail: out.detail,
        })
    }

    pub fn run_case(&self, case: &Case) -> Result<StatReport, VerifyError> {
        self.run(case.name, case.n_paths, &case.params)
    }

    fn memo<T: Send + Sync + 'static>(&self, key: String, f: impl FnOnce() -> Result<T, VerifyError>) -> Result<Arc<T>, VerifyError> {
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(v).downcast::<T>().expect("cache keys are unique per type"));
        }
        let v = Arc::new(f()?);
        self.cache.lock().expect("cache lock").insert(key, v.clone());
        Ok(v)
    }
}

/// Runs one registered test; all report fields except `runtime_seconds`
/// are a deterministic function of the arguments.
pub fn run_test(name: &str, n_paths: usize, seed: u64, params: &Params) -> Result<StatReport, VerifyError> {
    Battery::new(seed).run(name, n_paths, params)
}

#[cfg(test)]
mod tests;
