//! Append-only JSON-lines record of every run.
//!
//! Timestamps and wall times live here only, so the CSV outputs stay
//! byte-identical across reruns of one config.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const LEDGER_FILE: &str = "run_ledger.jsonl";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct OutputEntry {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunLedger {
    pub experiment: String,
    pub config_hash: String,
    pub software_version: String,
    pub master_seed: String,
    pub replicate_seeds: Vec<String>,
    pub started_unix: f64,
    pub wall_seconds: f64,
    pub jobs: usize,
    pub findings: usize,
    pub outputs: Vec<OutputEntry>,
}

impl RunLedger {
    pub fn new(experiment: &str, canonical_config: &str, master_seed: u64, jobs: usize) -> Self {
        let started = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0.0, |d| d.as_secs_f64());
        RunLedger {
            experiment: experiment.to_string(),
            config_hash: sha256_hex(canonical_config.as_bytes()),
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            // u64 values above 2^53 do not survive JSON numbers.
            master_seed: master_seed.to_string(),
            replicate_seeds: Vec::new(),
            started_unix: started,
            wall_seconds: 0.0,
            jobs,
            findings: 0,
            outputs: Vec::new(),
        }
    }

    pub fn record_output(&mut self, file: &str, contents: &[u8]) {
        self.outputs.push(OutputEntry {
            file: file.to_string(),
            bytes: contents.len(),
            sha256: sha256_hex(contents),
        });
    }

    pub fn append_to(&self, dir: &Path) -> std::io::Result<()> {
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join(LEDGER_FILE))?;
        let line = serde_json::to_string(self).map_err(std::io::Error::other)?;
        writeln!(f, "{line}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn ledger_appends_lines() {
        let dir = tempfile::tempdir().unwrap();
        let mut l = RunLedger::new("bounds", "k = 1.0\n", u64::MAX, 2);
        l.record_output("bounds.csv", b"a,b\n");
        l.append_to(dir.path()).unwrap();
        l.append_to(dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join(LEDGER_FILE)).unwrap();
        assert_eq!(text.lines().count(), 2);
        let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(v["master_seed"], "18446744073709551615");
        assert_eq!(v["outputs"][0]["bytes"], 4);
    }
}
