//! Flat `key = value` configuration file.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are the long
//! flag names without dashes, with `-` and `_` interchangeable.

use std::collections::BTreeMap;
use std::path::Path;

pub const KEYS: [&str; 13] = [
    "spot", "time", "strike", "rate", "vol", "maturity", "paths", "steps", "seed", "n_space", "n_time", "xi_max",
    "grids",
];

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value, got '{line}'", i + 1))?;
            let key = key.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(format!(
                    "line {}: unknown key '{key}'; expected one of {}",
                    i + 1,
                    KEYS.join(", ")
                ));
            }
            entries.insert(key, value.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, String>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| format!("config key '{key}' = '{v}': {e}")))
            .transpose()
    }
}
