//! Plain-text `key=value` configuration files supplying flag defaults.
//!
//! Lines are `key = value`; blank lines and `#` comments are ignored. Keys
//! mirror the long flags with underscores: `method`, `m`, `m_list`, `k`,
//! `k_scan`, `problem`, `mass`, `sdirk_fhat`, `format`, `out`, `ref_refine`,
//! `full`. Command-line flags override file values.

use crate::CliError;
use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

pub struct ConfigFile {
    values: HashMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut values = HashMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    return Err(CliError::Config(format!(
                        "{}:{}: expected key=value",
                        path.display(),
                        lineno + 1
                    )));
                };
                values.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(ConfigFile { values })
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.values.get(key).cloned()
    }

    /// Parses an optional typed value; a malformed entry is a config error.
    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::Config(format!("config key '{key}': cannot parse '{raw}'"))
            }),
        }
    }
}
