//! Report documents and atomic artifact writes.

use std::io::Write;
use std::path::Path;

use conestab::oracles::OracleLedger;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::scenario::{ConfigError, Scenario};

#[derive(Debug, Clone, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

impl Default for ToolInfo {
    fn default() -> Self {
        Self {
            name: "conestab",
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisOutcome {
    pub index: usize,
    pub kind: String,
    pub passed: bool,
    pub error: Option<String>,
    pub result: Value,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
}

/// Field order is the serialization order; the timestamp comes last so
/// that reruns differ only in the final field.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: ToolInfo,
    pub command: String,
    pub config_hash: String,
    pub scenario: Scenario,
    pub analyses: Vec<AnalysisOutcome>,
    pub provenance: OracleLedger,
    pub passed: bool,
    pub timestamp: u64,
}

/// SHA-256 of the canonical scenario JSON (after command-line overrides).
pub fn config_hash(s: &Scenario) -> String {
    let digest = Sha256::digest(s.to_json().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn unix_time() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ConfigError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| ConfigError(format!("{}: {e}", dir.display())))?;
    let io = |e: std::io::Error| ConfigError(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Shortest round-trip representation, empty for missing values.
pub fn fmt_num(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v:e}"),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nested/a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn numbers_round_trip() {
        let x = 0.1 + 0.2;
        assert_eq!(fmt_num(Some(x)).parse::<f64>().unwrap(), x);
        assert_eq!(fmt_num(None), "");
    }
}
