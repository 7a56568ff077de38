//! Single-file key-value configuration (TOML), overridable by flags.
//!
//! The file is one flat table: `key = value` with numeric, boolean or
//! string values. Every subcommand reads its parameters from the merged
//! view `flag.or(config[key]).or(default)`, so command-line flags always
//! win. The fully resolved parameter set of every run is embedded in its
//! manifest.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use toml::Value;

#[derive(Debug, Default, Clone)]
pub struct Config {
    values: BTreeMap<String, Value>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let table: toml::Table = text
            .parse()
            .with_context(|| format!("parsing config {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (k, v) in table {
            if v.is_table() || v.is_array() {
                bail!("config key `{k}`: only scalar values are supported");
            }
            values.insert(k, v);
        }
        Ok(Config { values })
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(x)) => Ok(Some(*x as f64)),
            Some(other) => bail!("config key `{key}`: expected a number, got {other}"),
        }
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(Value::Integer(x)) if *x >= 0 => Ok(Some(*x as u64)),
            Some(other) => bail!("config key `{key}`: expected a nonnegative integer, got {other}"),
        }
    }

    pub fn string(&self, key: &str) -> Result<Option<String>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(other) => bail!("config key `{key}`: expected a string, got {other}"),
        }
    }
}

/// `flag.or(config).or(default)` for floats.
pub fn pick_f64(flag: Option<f64>, cfg: &Config, key: &str, default: f64) -> Result<f64> {
    Ok(flag.or(cfg.f64(key)?).unwrap_or(default))
}

/// `flag.or(config).or(default)` for integers.
pub fn pick_u64(flag: Option<u64>, cfg: &Config, key: &str, default: u64) -> Result<u64> {
    Ok(flag.or(cfg.u64(key)?).unwrap_or(default))
}
