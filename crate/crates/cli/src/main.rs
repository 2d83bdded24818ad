//! `skewer-lab`: simulate interval-partition evolutions, run the
//! verification battery and dump sampler output.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{parse_config, ExperimentConfig};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "SKEWER_LAB_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "skewer-lab", version, about = "Interval-partition evolutions: simulation and verification")]
struct Cli {
    /// Flat `key = value` file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print the resolved configuration in config-file form and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate type-2 evolutions or discrete chains and write CSV.
    Simulate {
        #[command(subcommand)]
        what: Simulate,
    },
    /// Run one battery test, or `all`, and write one JSON report per line.
    Verify {
        /// Test name, `all`, or `list`.
        test: String,
        /// Extra test parameter as `key=value`; repeatable.
        #[arg(long = "param", value_parser = parse_pair)]
        params: Vec<(String, String)>,
        #[command(flatten)]
        common: Common,
    },
    /// Dump sampler output as CSV.
    Export {
        #[command(subcommand)]
        what: Export,
    },
}

#[derive(Subcommand, Debug)]
enum Simulate {
    /// Type-2 evolution paths.
    Type2 {
        #[command(flatten)]
        model: Model,
        /// Start every path from the pseudo-stationary law with rate `gamma`.
        #[arg(long)]
        pseudo_stationary: bool,
        /// Emit the de-Poissonized path instead of the level-indexed one.
        #[arg(long)]
        depoissonize: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Discrete chains.
    Chain {
        #[arg(long, value_enum, default_value_t = ChainKind::Aldous)]
        chain: ChainKind,
        /// Leaves (trees) or initial customers (restaurant).
        #[arg(long, default_value_t = 10)]
        size: usize,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// `θ` of the restaurant: -0.5, 0 or 0.5.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        theta: f64,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand, Debug)]
enum Export {
    /// Unit-mass `PDIP(1/2, θ2)` samples, one row per block.
    Pdip {
        /// 0 or 0.5.
        #[arg(long, default_value_t = 0.5)]
        theta2: f64,
        /// Customers per unit mass of the approximating restaurant, as `1/n`.
        #[arg(long)]
        scale_unit: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// `Dirichlet(1/2, 1/2, 1/2)` samples.
    Dirichlet {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ChainKind {
    Aldous,
    TwoTree,
    Crp,
}

#[derive(Args, Debug, Default)]
struct Model {
    #[arg(long)]
    construction: Option<String>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    beta_mass: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Lattice mass unit `1/n`.
    #[arg(long)]
    scale_unit: Option<f64>,
    /// Euler step of BESQ clocks.
    #[arg(long)]
    dt: Option<f64>,
    /// Output grid step in level (or in de-Poissonized time).
    #[arg(long)]
    du: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct Common {
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    s.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())).ok_or_else(|| format!("expected key=value, got {s:?}"))
}

impl Model {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        if let Some(c) = &self.construction {
            v.push(("construction", c.clone()));
        }
        for (k, x) in [
            ("a", self.a),
            ("b", self.b),
            ("beta_mass", self.beta_mass),
            ("gamma", self.gamma),
            ("scale_unit", self.scale_unit),
            ("dt", self.dt),
            ("du", self.du),
            ("horizon", self.horizon),
        ] {
            if let Some(x) = x {
                v.push((k, format!("{x:?}")));
            }
        }
        v
    }
}

impl Common {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        if let Some(p) = self.paths {
            v.push(("paths", p.to_string()));
        }
        if let Some(s) = self.seed {
            v.push(("seed", s.to_string()));
        }
        if let Some(o) = &self.out {
            v.push(("out", o.display().to_string()));
        }
        v
    }
}

/// Defaults, then the config file, then flags.
fn resolve(file: Option<&PathBuf>, subcommand: &str, flags: Vec<(&'static str, String)>) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        cfg.apply(&parse_config(&text)?)?;
    }
    cfg.subcommand = subcommand.to_string();
    for (k, v) in flags {
        cfg.set(k, &v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_workers() -> anyhow::Result<()> {
    let Ok(v) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| anyhow::anyhow!("{WORKERS_ENV}={v:?} is not a positive integer"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn usage_error(e: anyhow::Error) -> ExitCode {
    eprintln!("skewer-lab: {e:#}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_workers() {
        return usage_error(e);
    }
    let file = cli.config.as_ref();
    let prepared = match &cli.command {
        Command::Simulate { what: Simulate::Type2 { model, common, .. } } => {
            let mut flags = model.pairs();
            flags.extend(common.pairs());
            resolve(file, "simulate type2", flags)
        }
        Command::Simulate { what: Simulate::Chain { common, .. } } => resolve(file, "simulate chain", common.pairs()),
        Command::Verify { common, .. } => resolve(file, "verify", common.pairs()),
        Command::Export { what: Export::Pdip { common, scale_unit, .. } } => {
            let mut flags = common.pairs();
            flags.extend(scale_unit.map(|x| ("scale_unit", format!("{x:?}"))));
            resolve(file, "export pdip", flags)
        }
        Command::Export { what: Export::Dirichlet { common } } => resolve(file, "export dirichlet", common.pairs()),
    };
    let cfg = match prepared {
        Ok(c) => c,
        Err(e) => return usage_error(e),
    };
    if cli.print_config {
        print!("{}", cfg.to_config_string());
        return ExitCode::SUCCESS;
    }
    let result = match cli.command {
        Command::Simulate { what: Simulate::Type2 { pseudo_stationary, depoissonize, .. } } => {
            commands::simulate_type2(&cfg, pseudo_stationary, depoissonize)
        }
        Command::Simulate { what: Simulate::Chain { chain, size, steps, theta, .. } } => {
            commands::simulate_chain(&cfg, chain, size, steps, theta)
        }
        Command::Verify { test, params, .. } => commands::verify(&cfg, &test, &params),
        Command::Export { what: Export::Pdip { theta2, .. } } => commands::export_pdip(&cfg, theta2),
        Command::Export { what: Export::Dirichlet { .. } } => commands::export_dirichlet(&cfg),
    };
    match result {
        Ok(commands::Status::Success) => ExitCode::SUCCESS,
        Ok(commands::Status::TestFailure) => ExitCode::from(1),
        Err(e) if e.is::<commands::BadArgs>() => usage_error(e),
        Err(e) => {
            eprintln!("skewer-lab: {e:#}");
            ExitCode::from(1)
        }
    }
}
