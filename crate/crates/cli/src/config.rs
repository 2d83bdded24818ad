//! Experiment parameters: defaults, a flat `key = value` file, and flags,
//! applied in that order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use skewer_core::type2::Construction;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub subcommand: String,
    pub construction: Construction,
    pub a: f64,
    pub b: f64,
    pub beta_mass: f64,
    pub gamma: f64,
    pub scale_unit: f64,
    pub dt: f64,
    pub du: f64,
    pub horizon: f64,
    /// `None` lets `verify` use each test's own default.
    pub paths: Option<usize>,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            subcommand: String::new(),
            construction: Construction::Clocking,
            a: 0.5,
            b: 0.5,
            beta_mass: 0.5,
            gamma: 1.0,
            scale_unit: 1.0 / 256.0,
            dt: 1e-3,
            du: 0.01,
            horizon: 1.0,
            paths: None,
            seed: 1,
            out: None,
        }
    }
}

pub const KEYS: &[&str] =
    &["subcommand", "construction", "a", "b", "beta_mass", "gamma", "scale_unit", "dt", "du", "horizon", "paths", "seed", "out"];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| anyhow::anyhow!("{key}: cannot parse {v:?}"))
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "subcommand" => self.subcommand = v.to_string(),
            "construction" => self.construction = v.parse().map_err(anyhow::Error::msg)?,
            "a" => self.a = num(key, v)?,
            "b" => self.b = num(key, v)?,
            "beta_mass" => self.beta_mass = num(key, v)?,
            "gamma" => self.gamma = num(key, v)?,
            "scale_unit" => self.scale_unit = num(key, v)?,
            "dt" => self.dt = num(key, v)?,
            "du" => self.du = num(key, v)?,
            "horizon" => self.horizon = num(key, v)?,
            "paths" => self.paths = Some(num(key, v)?),
            "seed" => self.seed = num(key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            _ => bail!("unknown config key {key:?}"),
        }
        Ok(())
    }

    /// Applies every entry of a parsed config file.
    pub fn apply(&mut self, entries: &BTreeMap<String, String>) -> Result<()> {
        for (k, v) in entries {
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Flat `key = value` text that [`parse_config`] reads back to `self`.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        if !self.subcommand.is_empty() {
            put("subcommand", self.subcommand.clone());
        }
        put("construction", self.construction.name().to_string());
        for (k, v) in [
            ("a", self.a),
            ("b", self.b),
            ("beta_mass", self.beta_mass),
            ("gamma", self.gamma),
            ("scale_unit", self.scale_unit),
            ("dt", self.dt),
            ("du", self.du),
            ("horizon", self.horizon),
        ] {
            put(k, format!("{v:?}"));
        }
        if let Some(p) = self.paths {
            put("paths", p.to_string());
        }
        put("seed", self.seed.to_string());
        if let Some(o) = &self.out {
            put("out", o.display().to_string());
        }
        s
    }

    /// Lattice size `n` with `scale_unit = 1/n`.
    pub fn lattice_n(&self) -> Result<u32> {
        let n = (1.0 / self.scale_unit).round();
        if !(self.scale_unit > 0.0 && self.scale_unit <= 1.0) || (n * self.scale_unit - 1.0).abs() > 1e-9 {
            bail!("scale_unit must be 1/n for a positive integer n, got {}", self.scale_unit);
        }
        Ok(n as u32)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("gamma", self.gamma), ("dt", self.dt), ("du", self.du), ("horizon", self.horizon)];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{k} must be positive, got {v}");
            }
        }
        for (k, v) in [("a", self.a), ("b", self.b), ("beta_mass", self.beta_mass)] {
            if !(v >= 0.0 && v.is_finite()) {
                bail!("{k} must be nonnegative, got {v}");
            }
        }
        if self.a + self.b == 0.0 {
            bail!("a and b cannot both be zero");
        }
        if self.construction == Construction::Interweaving && (self.a == 0.0 || self.b == 0.0) {
            bail!("interweaving starts from the pseudo-stationary class and needs a, b > 0");
        }
        if self.paths == Some(0) {
            bail!("paths must be at least 1");
        }
        self.lattice_n()?;
        Ok(())
    }
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').with_context(|| format!("line {}: expected key = value", i + 1))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            bail!("line {}: unknown key {k:?}", i + 1);
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn comments_and_spacing() {
        let m = parse_config("# header\n\n a = 0.25 \nseed=9\n").unwrap();
        let mut c = ExperimentConfig::default();
        c.apply(&m).unwrap();
        assert_eq!((c.a, c.seed), (0.25, 9));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(parse_config("colour = red").is_err());
        assert!(parse_config("just text").is_err());
        let mut c = ExperimentConfig::default();
        assert!(c.set("a", "half").is_err());
        assert!(c.set("construction", "braiding").is_err());
    }

    #[test]
    fn validation() {
        assert!(ExperimentConfig::default().validate().is_ok());
        let bad = |f: fn(&mut ExperimentConfig)| {
            let mut c = ExperimentConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.gamma = 0.0));
        assert!(bad(|c| c.scale_unit = 0.3));
        assert!(bad(|c| c.a = -1.0));
        assert!(bad(|c| c.paths = Some(0)));
        assert!(bad(|c| {
            c.construction = Construction::Interweaving;
            c.b = 0.0;
        }));
    }

    fn configs() -> impl Strategy<Value = ExperimentConfig> {
        (
            prop::sample::select(Construction::ALL.to_vec()),
            (0.0..10.0f64, 0.0..10.0f64, 0.0..10.0f64, 1e-3..10.0f64),
            (1u32..4096, 1e-6..1.0f64, 1e-6..1.0f64, 1e-3..100.0f64),
            (prop::option::of(1usize..1_000_000), any::<u64>(), prop::option::of("[a-z0-9_./]{1,20}")),
        )
            .prop_map(|(construction, (a, b, beta_mass, gamma), (n, dt, du, horizon), (paths, seed, out))| ExperimentConfig {
                subcommand: "simulate".into(),
                construction,
                a,
                b,
                beta_mass,
                gamma,
                scale_unit: 1.0 / n as f64,
                dt,
                du,
                horizon,
                paths,
                seed,
                out: out.map(PathBuf::from),
            })
    }

    proptest! {
        #[test]
        fn config_file_round_trips(c in configs()) {
            let mut back = ExperimentConfig::default();
            back.apply(&parse_config(&c.to_config_string()).unwrap()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
