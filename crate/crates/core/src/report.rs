//! Run configuration, seed policy, exit codes and versioned reports.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HalluError, Result};

pub const SCHEMA: &str = "v1";

/// Environment variable that overrides a config file's seed.
pub const SEED_ENV: &str = "HALLU_SEED";

pub fn schema_v1() -> String {
    SCHEMA.to_string()
}

/// Process exit codes. Stable contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(i32)]
pub enum ExitStatus {
    Success = 0,
    Validation = 2,
    Failed = 3,
    MissingArtifact = 4,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

impl From<&HalluError> for ExitStatus {
    fn from(e: &HalluError) -> Self {
        match e {
            HalluError::Input(_) | HalluError::Model(_) | HalluError::Json(_) | HalluError::Csv(_) => {
                ExitStatus::Validation
            }
            HalluError::Infeasible(_) | HalluError::Numerical(_) => ExitStatus::Failed,
            HalluError::MissingArtifact(_) => ExitStatus::MissingArtifact,
            HalluError::Io(e) if e.kind() == std::io::ErrorKind::NotFound => ExitStatus::MissingArtifact,
            HalluError::Io(_) => ExitStatus::Validation,
        }
    }
}

/// Resolve the master seed: flag, then `HALLU_SEED`, then the config file.
/// A run never falls back to ambient entropy.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>, file: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(raw) = env {
        return raw
            .trim()
            .parse()
            .map_err(|_| HalluError::input(format!("{SEED_ENV}={raw:?} is not an unsigned integer")));
    }
    file.ok_or_else(|| HalluError::input(format!("no seed given (use --seed, {SEED_ENV}, or \"seed\" in the config)")))
}

/// Hex SHA-256 of the canonical JSON form (object keys sorted).
pub fn config_hash(value: &serde_json::Value) -> String {
    let canonical = serde_json::to_string(value).expect("JSON values always serialize");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: String,
    /// Parsed config file contents (command-specific parameters).
    pub params: serde_json::Value,
    pub seed: u64,
    pub workers: usize,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn new(command: &str, params: serde_json::Value, seed: u64, workers: usize, out_dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&out_dir)?;
        Ok(Self { command: command.into(), params, seed, workers, out_dir })
    }

    /// Hash over everything that determines the outputs.
    pub fn hash(&self) -> String {
        config_hash(&serde_json::json!({
            "command": self.command,
            "params": self.params,
            "seed": self.seed,
        }))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub elapsed_ms: u128,
}

/// Top-level report written by every command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub workers: usize,
    pub outputs: serde_json::Value,
    /// Trace/plot-data files written next to the report.
    pub traces: Vec<String>,
    pub timing: Timing,
}

impl RunReport {
    pub fn new(cfg: &RunConfig, outputs: serde_json::Value, traces: Vec<String>, elapsed_ms: u128) -> Self {
        Self {
            schema: schema_v1(),
            command: cfg.command.clone(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            workers: cfg.workers,
            outputs,
            traces,
            timing: Timing { elapsed_ms },
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => HalluError::MissingArtifact(path.display().to_string()),
            _ => HalluError::Io(e),
        })?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(1), Some("2"), Some(3)).unwrap(), 1);
        assert_eq!(resolve_seed(None, Some("2"), Some(3)).unwrap(), 2);
        assert_eq!(resolve_seed(None, None, Some(3)).unwrap(), 3);
        assert!(resolve_seed(None, None, None).is_err());
        assert!(resolve_seed(None, Some("abc"), Some(3)).is_err());
    }

    #[test]
    fn hash_ignores_key_order() {
        let a: serde_json::Value = serde_json::from_str(r#"{"a":1,"b":[1,2]}"#).unwrap();
        let b: serde_json::Value = serde_json::from_str(r#"{"b":[1,2],"a":1}"#).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn exit_codes_are_stable() {
        assert_eq!(ExitStatus::from(&HalluError::Input("x".into())).code(), 2);
        assert_eq!(ExitStatus::from(&HalluError::Infeasible("x".into())).code(), 3);
        assert_eq!(ExitStatus::from(&HalluError::MissingArtifact("x".into())).code(), 4);
    }
}
