//! Plain-text `key=value` run configuration.
//!
//! A config file supplies defaults for any tunable; explicit flags override
//! it, and built-in defaults fill whatever remains. Lines are `key=value`,
//! with `#` comments and blank lines ignored. Unknown keys are rejected up
//! front so typos cannot silently fall back to defaults.

use std::collections::HashMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use cwhash_core::{Error, Result};

/// Every key a config file may set, across all subcommands.
const ALLOWED_KEYS: &[&str] = &[
    "classes",
    "per-class",
    "dim",
    "spread",
    "multilabel",
    "query-per-class",
    "query-total",
    "train-per-class",
    "train-total",
    "bits",
    "sigma-sq",
    "alpha",
    "eta1",
    "eta2",
    "lr",
    "weight-decay",
    "batch",
    "epochs-stage1",
    "epochs-stage2",
    "center-mode",
    "center-update-period",
    "stage2-centers",
    "seed",
    "threads",
    "k",
    "k-max",
    "row",
    "data",
    "net",
    "db",
    "query",
    "codes",
    "db-codes",
    "query-codes",
    "out",
];

/// Parsed config file contents (possibly empty when no file was given).
#[derive(Debug)]
pub struct FileConfig {
    values: HashMap<String, String>,
}

impl FileConfig {
    pub fn empty() -> FileConfig {
        FileConfig {
            values: HashMap::new(),
        }
    }

    /// Loads and validates a `key=value` file; `None` yields an empty
    /// config.
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::empty());
        };
        let text = std::fs::read_to_string(path)?;
        let mut values = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "config line {} is not key=value: {raw:?}",
                    lineno + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            if !ALLOWED_KEYS.contains(&key) {
                return Err(Error::Config(format!("unknown config key {key:?}")));
            }
            if values.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::Config(format!("config key {key:?} set twice")));
            }
        }
        Ok(FileConfig { values })
    }

    /// The raw string for `key`, if the file set it.
    pub fn raw(&self, key: &str) -> Option<&str> {
        debug_assert!(ALLOWED_KEYS.contains(&key), "unlisted key {key}");
        self.values.get(key).map(String::as_str)
    }

    /// Parses the file's value for `key` when present.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|e| {
                Error::Config(format!("config key {key:?}: invalid value {raw:?}: {e}"))
            }),
        }
    }

    /// Flag value if given, else the config file's, else the default.
    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Flag value if given, else the config file's, else `None`.
    pub fn resolve_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.get(key)
    }
}
