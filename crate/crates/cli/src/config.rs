//! `key = value` config files and their merge with command-line flags.
//!
//! Precedence is flags, then file, then built-in defaults. Unknown keys are
//! rejected so that typos do not silently fall back to defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, CliResult};

pub const KNOWN_KEYS: &[&str] = &[
    "d",
    "s",
    "lambda",
    "rmax",
    "n",
    "epsilon",
    "kappa",
    "kappas",
    "tend",
    "cfl",
    "dtfloor",
    "linfmax",
    "margin",
    "sample_every",
    "snapshot_every",
    "gaussian_amplitude",
    "gaussian_width",
    "init_file",
    "out",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::usage(format!(
                    "config line {}: expected `key = value`",
                    lineno + 1
                ))
            })?;
            let key = key.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::usage(format!(
                    "config line {}: unknown key `{key}`",
                    lineno + 1
                )));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::usage(format!("config key `{key}`: cannot parse `{v}`"))),
        }
    }

    /// Comma-separated list.
    pub fn get_list(&self, key: &str) -> CliResult<Option<Vec<f64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => parse_list(v)
                .map(Some)
                .map_err(|_| CliError::usage(format!("config key `{key}`: cannot parse `{v}`"))),
        }
    }
}

pub fn parse_list(text: &str) -> Result<Vec<f64>, std::num::ParseFloatError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

/// Flag value, else file value, else default.
pub fn pick<T: FromStr>(flag: Option<T>, file: &FileConfig, key: &str, default: T) -> CliResult<T> {
    Ok(match flag {
        Some(v) => v,
        None => file.get(key)?.unwrap_or(default),
    })
}

/// Like [`pick`] without a default.
pub fn pick_opt<T: FromStr>(flag: Option<T>, file: &FileConfig, key: &str) -> CliResult<Option<T>> {
    Ok(match flag {
        Some(v) => Some(v),
        None => file.get(key)?,
    })
}

/// Like [`pick_opt`] but the value is mandatory.
pub fn require<T: FromStr>(flag: Option<T>, file: &FileConfig, key: &str) -> CliResult<T> {
    pick_opt(flag, file, key)?
        .ok_or_else(|| CliError::usage(format!("missing required parameter --{key}")))
}
