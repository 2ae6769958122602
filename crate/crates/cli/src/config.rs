//! Flat `section.key = value` configuration and the resolved run snapshot.
//!
//! Precedence: built-in defaults, then the config file, then command-line
//! flags. Every command writes its fully resolved configuration next to its
//! outputs so a run can be reproduced from the artifacts alone.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use mpo_core::ppr::{DanglingRule, PprConfig};

use crate::{CliError, Result};

pub const DEFAULT_THREADS: usize = 1;
pub const THREADS_ENV: &str = "MPO_THREADS";

/// Settings consumed by classifier training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub fractions: (f64, f64, f64),
    pub seed: u64,
    pub iter_cap: u32,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self { fractions: (0.8, 0.1, 0.1), seed: 0, iter_cap: 1000 }
    }
}

/// Fully resolved per-run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub ppr: PprConfig,
    pub train: TrainSettings,
    pub eval_k: Option<usize>,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            ppr: PprConfig::default(),
            train: TrainSettings::default(),
            eval_k: None,
            threads: DEFAULT_THREADS,
        }
    }
}

/// Parse the flat key-value format: one `key = value` per line, `#` starts
/// a comment, blank lines ignored.
pub fn parse_kv(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::parse(path, i + 1, "expected `key = value`"));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

pub fn read_kv_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_kv(&text, path)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("key `{key}`: cannot parse `{value}`")))
}

pub fn parse_split(key: &str, value: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(CliError::Config(format!(
            "key `{key}`: expected three comma-separated fractions, got `{value}`"
        )));
    }
    Ok((
        parse_value(key, parts[0])?,
        parse_value(key, parts[1])?,
        parse_value(key, parts[2])?,
    ))
}

pub fn parse_dangling(key: &str, value: &str) -> Result<DanglingRule> {
    match value {
        "absorb" => Ok(DanglingRule::Absorb),
        "teleport" => Ok(DanglingRule::Teleport),
        other => Err(CliError::Config(format!(
            "key `{key}`: expected `absorb` or `teleport`, got `{other}`"
        ))),
    }
}

impl RunConfig {
    /// Overlay `map` (config file or flag overrides) onto `self`.
    pub fn apply(&mut self, map: &BTreeMap<String, String>) -> Result<()> {
        for (key, value) in map {
            match key.as_str() {
                "ppr.alpha" => self.ppr.alpha = parse_value(key, value)?,
                "ppr.epsilon" => self.ppr.epsilon = parse_value(key, value)?,
                "ppr.p_f" => self.ppr.p_f = parse_value(key, value)?,
                "ppr.hop_cap" => {
                    self.ppr.hop_cap = if value == "none" {
                        None
                    } else {
                        Some(parse_value(key, value)?)
                    }
                }
                "ppr.seed" => self.ppr.seed = parse_value(key, value)?,
                "ppr.dangling_rule" => self.ppr.dangling = parse_dangling(key, value)?,
                "train.split" => self.train.fractions = parse_split(key, value)?,
                "train.seed" => self.train.seed = parse_value(key, value)?,
                "train.iter_cap" => self.train.iter_cap = parse_value(key, value)?,
                "eval.k" => {
                    self.eval_k = if value == "none" {
                        None
                    } else {
                        Some(parse_value(key, value)?)
                    }
                }
                "run.threads" => self.threads = parse_value(key, value)?,
                other => {
                    return Err(CliError::Config(format!("unknown config key `{other}`")));
                }
            }
        }
        Ok(())
    }

    /// Load defaults, overlay an optional config file, then flag overrides.
    pub fn resolve(
        config_file: Option<&Path>,
        overrides: &BTreeMap<String, String>,
    ) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = config_file {
            cfg.apply(&read_kv_file(path)?)?;
        }
        cfg.apply(overrides)?;
        cfg.ppr.validate()?;
        if cfg.threads == 0 {
            return Err(CliError::Config("run.threads must be >= 1".into()));
        }
        Ok(cfg)
    }

    /// The snapshot written next to run outputs.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "eval.k = {}", self.eval_k.map_or("none".into(), |k| k.to_string()));
        let _ = writeln!(out, "ppr.alpha = {}", self.ppr.alpha);
        let _ = writeln!(
            out,
            "ppr.dangling_rule = {}",
            match self.ppr.dangling {
                DanglingRule::Absorb => "absorb",
                DanglingRule::Teleport => "teleport",
            }
        );
        let _ = writeln!(out, "ppr.epsilon = {}", self.ppr.epsilon);
        let _ = writeln!(
            out,
            "ppr.hop_cap = {}",
            self.ppr.hop_cap.map_or("none".into(), |c| c.to_string())
        );
        let _ = writeln!(out, "ppr.p_f = {}", self.ppr.p_f);
        let _ = writeln!(out, "ppr.seed = {}", self.ppr.seed);
        let _ = writeln!(out, "run.threads = {}", self.threads);
        let _ = writeln!(out, "train.iter_cap = {}", self.train.iter_cap);
        let _ = writeln!(out, "train.seed = {}", self.train.seed);
        let (a, b, c) = self.train.fractions;
        let _ = writeln!(out, "train.split = {a},{b},{c}");
        out
    }

    pub fn config_hash(&self) -> String {
        format!("{:016x}", crate::fnv64(self.to_text().as_bytes()))
    }
}

/// Thread-count resolution: explicit flag, then `MPO_THREADS`, then the
/// config value already in `cfg`.
pub fn resolve_threads(flag: Option<usize>, cfg: &RunConfig) -> Result<usize> {
    if let Some(t) = flag {
        if t == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        return Ok(t);
    }
    if let Ok(env) = std::env::var(THREADS_ENV) {
        let t: usize = env
            .parse()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV}={env} is not a number")))?;
        if t == 0 {
            return Err(CliError::Config(format!("{THREADS_ENV} must be >= 1")));
        }
        return Ok(t);
    }
    Ok(cfg.threads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn kv(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn parse_kv_file_shape() {
        let text = "# comment\nppr.alpha = 0.4\n\nppr.seed=9 # trailing\n";
        let map = parse_kv(text, &PathBuf::from("x.cfg")).unwrap();
        assert_eq!(map.get("ppr.alpha").unwrap(), "0.4");
        assert_eq!(map.get("ppr.seed").unwrap(), "9");
    }

    #[test]
    fn parse_kv_rejects_garbage() {
        let err = parse_kv("not a pair\n", &PathBuf::from("x.cfg")).unwrap_err();
        assert!(err.to_string().contains("x.cfg:1"));
    }

    #[test]
    fn apply_and_snapshot_roundtrip() {
        let mut cfg = RunConfig::default();
        cfg.apply(&kv(&[
            ("ppr.alpha", "0.3"),
            ("ppr.hop_cap", "4"),
            ("ppr.dangling_rule", "teleport"),
            ("train.split", "0.7,0.2,0.1"),
            ("run.threads", "3"),
        ]))
        .unwrap();
        assert_eq!(cfg.ppr.alpha, 0.3);
        assert_eq!(cfg.ppr.hop_cap, Some(4));
        assert_eq!(cfg.ppr.dangling, DanglingRule::Teleport);
        assert_eq!(cfg.train.fractions, (0.7, 0.2, 0.1));
        assert_eq!(cfg.threads, 3);

        let text = cfg.to_text();
        let reparsed = parse_kv(&text, &PathBuf::from("snap.cfg")).unwrap();
        let mut cfg2 = RunConfig::default();
        cfg2.apply(&reparsed).unwrap();
        assert_eq!(cfg, cfg2);
    }

    #[test]
    fn unknown_key_rejected() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply(&kv(&[("ppr.alhpa", "0.3")])).unwrap_err();
        assert!(err.to_string().contains("ppr.alhpa"));
    }

    #[test]
    fn resolve_validates_ppr() {
        let err = RunConfig::resolve(None, &kv(&[("ppr.alpha", "1.5")])).unwrap_err();
        assert!(err.to_string().contains("alpha"));
    }

    #[test]
    fn config_hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        b.ppr.seed = 1;
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash(), RunConfig::default().config_hash());
    }
}
