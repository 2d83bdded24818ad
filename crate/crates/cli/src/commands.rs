use std::fmt::Write as _;
use std::io::Write as _;

use anyhow::{Context, Result};
use rayon::prelude::*;
use skewer_core::chains::{
    aldous_downup_step, ocrp_sample, poissonized_step, project_two_tree, two_tree_downup_step, uniform_tree, CrpConfig,
    CrpParams, TwoTreeOutcome,
};
use skewer_core::depoisson::{depoissonize, DEPOISSON_CSV_HEADER};
use skewer_core::ip::{scale, IntervalPartition};
use skewer_core::kernels::{sample_dirichlet_half, sample_pdip};
use skewer_core::rng::RngStream;
use skewer_core::type2::{run_construction, run_pseudo_stationary, Type2Config, PATH_CSV_HEADER};
use skewer_core::verify::{battery_plan, lookup, Battery, Case, Params, VerifyError, REGISTRY};

use crate::config::ExperimentConfig;
use crate::ChainKind;

pub const SCHEMA_VERSION: u32 = 1;

pub enum Status {
    Success,
    TestFailure,
}

/// Errors in the request itself rather than in running it.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct BadArgs(pub String);

fn bad(msg: impl Into<String>) -> anyhow::Error {
    BadArgs(msg.into()).into()
}

/// Writes a versioned comment line, the column header if any, and `body`.
fn emit(cfg: &ExperimentConfig, schema: &str, tags: &str, columns: Option<&str>, body: &str) -> Result<()> {
    let mut text = format!("# skewer-lab {schema} v{SCHEMA_VERSION} seed={}{tags}\n", cfg.seed);
    if let Some(c) = columns {
        text.push_str(c);
        text.push('\n');
    }
    text.push_str(body);
    match &cfg.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

fn path_rng(cfg: &ExperimentConfig, i: usize) -> RngStream {
    RngStream::new(cfg.seed, i as u64)
}

pub fn simulate_type2(cfg: &ExperimentConfig, pseudo_stationary: bool, depoissonized: bool) -> Result<Status> {
    let n = cfg.lattice_n()?;
    let t2 = Type2Config { n, dt: cfg.dt, horizon: cfg.horizon, max_horizon: cfg.horizon.max(16.0) };
    let rows = (0..cfg.paths.unwrap_or(10))
        .into_par_iter()
        .map(|i| -> Result<String> {
            let mut rng = path_rng(cfg, i);
            let run = if pseudo_stationary {
                run_pseudo_stationary(cfg.construction, cfg.gamma, &t2, &mut rng)?
            } else {
                let beta = if cfg.beta_mass > 0.0 {
                    scale(cfg.beta_mass, &sample_pdip(0.5, n as usize, &mut rng)?)
                } else {
                    IntervalPartition::empty()
                };
                run_construction(cfg.construction, cfg.a, cfg.b, &beta, cfg.gamma, &t2, &mut rng)?
            };
            let path = run.record(cfg.du);
            Ok(if depoissonized { depoissonize(&path, cfg.du)?.csv_rows(i) } else { path.csv_rows(i) })
        })
        .collect::<Result<Vec<_>>>()?;
    let (schema, columns) = if depoissonized { ("depoissonized-path", DEPOISSON_CSV_HEADER) } else { ("type2-path", PATH_CSV_HEADER) };
    let tags = format!(" construction={}", cfg.construction.name());
    emit(cfg, schema, &tags, Some(columns), &rows.concat())?;
    Ok(Status::Success)
}

fn join(v: &[u32]) -> String {
    v.iter().map(u32::to_string).collect::<Vec<_>>().join(";")
}

pub fn simulate_chain(cfg: &ExperimentConfig, chain: ChainKind, size: usize, steps: usize, theta: f64) -> Result<Status> {
    let min = if chain == ChainKind::Crp { 1 } else { 3 };
    if size < min {
        return Err(bad(format!("size must be at least {min}")));
    }
    let params = CrpParams::from_theta(theta).map_err(|e| bad(e.to_string()))?;
    let rows = (0..cfg.paths.unwrap_or(10))
        .into_par_iter()
        .map(|i| -> Result<String> {
            let mut rng = path_rng(cfg, i);
            let mut s = String::new();
            match chain {
                ChainKind::Aldous => {
                    let mut t = uniform_tree(size, &mut rng);
                    let _ = writeln!(s, "{i},0,{}", t.canonical());
                    for k in 1..=steps {
                        t = aldous_downup_step(&t, &mut rng)?;
                        let _ = writeln!(s, "{i},{k},{}", t.canonical());
                    }
                }
                ChainKind::TwoTree => {
                    let tree = uniform_tree(size, &mut rng);
                    let mut t = project_two_tree(&tree, tree.top())?;
                    let _ = writeln!(s, "{i},0,{},{},{}", t.m1, t.m2, join(&t.spinal));
                    for k in 1..=steps {
                        match two_tree_downup_step(&t, &mut rng)? {
                            TwoTreeOutcome::Alive(next) => t = next,
                            TwoTreeOutcome::Degenerate => break,
                        }
                        let _ = writeln!(s, "{i},{k},{},{},{}", t.m1, t.m2, join(&t.spinal));
                    }
                }
                ChainKind::Crp => {
                    let start = ocrp_sample(if theta == 0.0 { 0.0 } else { 0.5 }, size, &mut rng);
                    let mut c = CrpConfig::new(start, params)?;
                    let mut time = 0.0;
                    let _ = writeln!(s, "{i},0,0,{},{}", c.customers(), join(&c.tables));
                    for k in 1..=steps {
                        let Ok((next, dt)) = poissonized_step(&c, &mut rng) else { break };
                        c = next;
                        time += dt;
                        let _ = writeln!(s, "{i},{k},{time},{},{}", c.customers(), join(&c.tables));
                    }
                }
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    let columns = match chain {
        ChainKind::Aldous => "path_id,step,tree",
        ChainKind::TwoTree => "path_id,step,m1,m2,spinal",
        ChainKind::Crp => "path_id,step,time,customers,tables",
    };
    emit(cfg, &format!("chain-{chain:?}").to_lowercase(), "", Some(columns), &rows.concat())?;
    Ok(Status::Success)
}

pub fn verify(cfg: &ExperimentConfig, test: &str, extra: &[(String, String)]) -> Result<Status> {
    if test == "list" {
        let mut s = String::new();
        for t in REGISTRY {
            let _ = writeln!(s, "{}\tcriterion {}\t{}", t.name, t.criterion, t.summary);
        }
        print!("{s}");
        return Ok(Status::Success);
    }
    let mut cases = if test == "all" {
        battery_plan()
    } else {
        let spec = lookup(test).ok_or_else(|| bad(format!("unknown test {test:?}; try `verify list`")))?;
        vec![Case { criterion: spec.criterion, name: spec.name, n_paths: spec.default_paths, params: Params::new() }]
    };
    for case in &mut cases {
        if let Some(p) = cfg.paths.filter(|_| case.n_paths > 0) {
            case.n_paths = p;
        }
        for (k, v) in extra {
            case.params.insert(k, v);
        }
    }
    let battery = Battery::new(cfg.seed);
    let mut body = String::new();
    let mut all_pass = true;
    for case in &cases {
        let report = battery.run_case(case).map_err(|e| match e {
            VerifyError::Simulation(_) => anyhow::Error::from(e),
            _ => bad(e.to_string()),
        })?;
        all_pass &= report.pass;
        body.push_str(&serde_json::to_string(&report)?);
        body.push('\n');
        if cfg.out.is_some() {
            eprintln!("{} {}: {}", case.name, serde_json::to_string(&case.params)?, if report.pass { "pass" } else { "FAIL" });
        }
    }
    emit(cfg, "verify-report", "", None, &body)?;
    Ok(if all_pass { Status::Success } else { Status::TestFailure })
}

pub fn export_pdip(cfg: &ExperimentConfig, theta2: f64) -> Result<Status> {
    let n = cfg.lattice_n()? as usize;
    let rows = (0..cfg.paths.unwrap_or(10))
        .into_par_iter()
        .map(|i| -> Result<String> {
            let beta = sample_pdip(theta2, n, &mut path_rng(cfg, i)).map_err(|e| bad(e.to_string()))?;
            let mut s = String::new();
            for (k, b) in beta.blocks().iter().enumerate() {
                let _ = writeln!(s, "{i},{k},{},{}", b.mass, b.div_left.unwrap_or(f64::NAN));
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    emit(cfg, "pdip", &format!(" theta2={theta2}"), Some("sample_id,block,mass,div_left"), &rows.concat())?;
    Ok(Status::Success)
}

pub fn export_dirichlet(cfg: &ExperimentConfig) -> Result<Status> {
    let mut s = String::new();
    for i in 0..cfg.paths.unwrap_or(10) {
        let (a, b, c) = sample_dirichlet_half(&mut path_rng(cfg, i));
        let _ = writeln!(s, "{i},{a},{b},{c}");
    }
    emit(cfg, "dirichlet-half", "", Some("sample_id,a1,a2,a3"), &s)?;
    Ok(Status::Success)
}
