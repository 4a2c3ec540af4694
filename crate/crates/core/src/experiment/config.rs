//! `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Keys match the
//! [`ExperimentConfig`] fields, plus:
//!
//! - `min_support`, `min_confidence`, `max_rule_items` for the thresholds,
//! - `catalog = a, b, c` for the drug list,
//! - `bundle = actiq fentora meperidine @ 0.3`, repeatable; the first one
//!   replaces the default profile,
//! - `profile = uniform` to drop all bundles,
//! - `barrier_timeout_ms`, and `clock_start_ms = system` for wall time.

use std::path::Path;
use std::time::Duration;

use super::{Bundle, CorrelationProfile, ExperimentConfig, ExperimentError};
use crate::lifecycle::ArtifactFormat;

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| format!("{key}: {e}"))
}

impl ExperimentConfig {
    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let value = value.trim();
        match key {
            "n_patients" => self.n_patients = parse(key, value)?,
            "drugs_per_patient" => self.drugs_per_patient = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "min_support" => self.params.min_support = parse(key, value)?,
            "min_confidence" => self.params.min_confidence = parse(key, value)?,
            "max_rule_items" => self.params.max_rule_items = parse(key, value)?,
            "mode" => self.mode = value.parse()?,
            "threads" => self.threads = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            "barrier_timeout_ms" => {
                self.barrier_timeout = Duration::from_millis(parse(key, value)?)
            }
            "window_capacity" => self.window_capacity = Some(parse(key, value)?),
            "patients_per_block" => self.patients_per_block = parse(key, value)?,
            "clock_start_ms" => {
                self.clock_start_ms = match value {
                    "system" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "format" => {
                self.format = match value {
                    "text" => ArtifactFormat::RulesetText,
                    "binary" => ArtifactFormat::RulesetBinary,
                    other => return Err(format!("format: `{other}` is not text or binary")),
                }
            }
            "catalog" => {
                self.catalog = value
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            }
            "profile" => match value {
                "uniform" => self.profile = CorrelationProfile::uniform(),
                "default" => self.profile = CorrelationProfile::default(),
                other => return Err(format!("profile: `{other}` is not uniform or default")),
            },
            "bundle" => {
                let (drugs, weight) = value
                    .split_once('@')
                    .ok_or_else(|| "bundle: expected `drug drug ... @ weight`".to_string())?;
                let drugs: Vec<&str> = drugs.split_whitespace().collect();
                if drugs.is_empty() {
                    return Err("bundle: no drugs".into());
                }
                self.profile
                    .bundles
                    .push(Bundle::new(&drugs, parse(key, weight.trim())?));
            }
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Parses a config file body on top of the defaults.
    pub fn from_kv_str(text: &str) -> Result<Self, ExperimentError> {
        let mut cfg = ExperimentConfig::default();
        let mut custom_bundles = false;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| ExperimentError::ConfigParse {
                line: n + 1,
                reason,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            let key = key.trim();
            if key == "bundle" && !custom_bundles {
                cfg.profile.bundles.clear();
                custom_bundles = true;
            }
            cfg.set(key, value).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ExperimentError> {
        Self::from_kv_str(&std::fs::read_to_string(path)?)
    }
}
