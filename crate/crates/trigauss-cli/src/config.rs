//! Key-value configuration files.
//!
//! One `key = value` entry per line; `#` starts a comment; blank lines are
//! ignored. Every command-line flag has a config twin named after the flag
//! with dashes replaced by underscores (`--r-step` ↔ `r_step`), and the
//! flag wins when both are given. Unknown keys are rejected so typos fail
//! loudly instead of silently falling back to defaults.

use std::collections::BTreeMap;
use std::path::Path;

/// Accepted configuration keys (the flag twins of every subcommand).
pub const KNOWN_KEYS: &[&str] = &[
    "family",
    "r",
    "second",
    "detectors",
    "detector",
    "detector_tol",
    "d_max",
    "r_min",
    "r_max",
    "r_step",
    "second_min",
    "second_max",
    "second_step",
    "axis",
    "low",
    "high",
    "tol",
    "csv",
    "json",
    "svg",
    "out_dir",
    "quick",
    "workers",
    "timings",
    "solver_tol",
    "max_iter",
];

#[derive(Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn empty() -> Self {
        Config::default()
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Config::parse_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    fn parse_str(text: &str) -> Result<Self, String> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", lineno + 1))?;
            let key = key.trim().replace('-', "_");
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(format!("line {}: unknown key `{key}`", lineno + 1));
            }
            if value.is_empty() {
                return Err(format!("line {}: empty value for `{key}`", lineno + 1));
            }
            entries.insert(key, value.to_string());
        }
        Ok(Config { entries })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Parses the entry under `key`, if present.
    pub fn parse<T>(&self, key: &str) -> Result<Option<T>, String>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<T>()
                .map(Some)
                .map_err(|e| format!("config key `{key}` = `{s}`: {e}")),
        }
    }

    pub fn parse_bool(&self, key: &str) -> Result<Option<bool>, String> {
        match self.raw(key) {
            None => Ok(None),
            Some("true" | "yes" | "on" | "1") => Ok(Some(true)),
            Some("false" | "no" | "off" | "0") => Ok(Some(false)),
            Some(other) => Err(format!("config key `{key}` = `{other}`: expected a boolean")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_entries_comments_and_blank_lines() {
        let cfg = Config::parse_str(
            "# scan settings\nfamily = vac\nr-step = 0.05  # coarse\n\nworkers=2\n",
        )
        .unwrap();
        assert_eq!(cfg.raw("family"), Some("vac"));
        assert_eq!(cfg.parse::<f64>("r_step").unwrap(), Some(0.05));
        assert_eq!(cfg.parse::<usize>("workers").unwrap(), Some(2));
        assert_eq!(cfg.parse::<f64>("r_min").unwrap(), None);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(Config::parse_str("familly = vac\n").unwrap_err().contains("unknown key"));
        assert!(Config::parse_str("family vac\n").unwrap_err().contains("key = value"));
        assert!(Config::parse_str("family =\n").unwrap_err().contains("empty value"));
        let cfg = Config::parse_str("workers = lots\n").unwrap();
        assert!(cfg.parse::<usize>("workers").is_err());
        assert!(Config::parse_str("timings = maybe\n")
            .unwrap()
            .parse_bool("timings")
            .is_err());
    }
}
