//! Result envelopes, atomic file writes and CSV tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_ID: &str = "tmsurf-envelope/1";

/// Reference value used alongside a computed one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub name: String,
    pub source: String,
    pub value: f64,
    pub computed: f64,
    pub relative_error: f64,
}

impl OracleValue {
    pub fn new(name: &str, source: &str, value: f64, computed: f64) -> Self {
        Self {
            name: name.into(),
            source: source.into(),
            value,
            computed,
            relative_error: ((computed - value) / value).abs(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema: String,
    pub artifact_version: String,
    pub subcommand: String,
    pub config: BTreeMap<String, String>,
    pub mesh_hash: Option<String>,
    pub timing_seconds: f64,
    pub oracles: Vec<OracleValue>,
    pub payload: T,
}

/// Fixed-column table written as comma-separated text with a header row.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Config(format!("csv: {e}"));
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.into_inner().map_err(|e| CliError::Config(format!("csv: {e}")))
    }
}

/// Writes `bytes` to a sibling temporary file and renames it into place, so
/// `path` never holds a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    let tmp: PathBuf = path.with_file_name(name);
    fs::write(&tmp, bytes).map_err(|e| CliError::Config(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::Config(format!("cannot move output into {}: {e}", path.display()))
    })
}

pub fn read_envelope<T: serde::de::DeserializeOwned>(path: &str, expected: &str) -> Result<Envelope<T>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {path}: {e}")))?;
    let env: Envelope<serde_json::Value> =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{path} is not a result envelope: {e}")))?;
    if env.subcommand != expected {
        return Err(CliError::Config(format!(
            "{path} holds a `{}` result, expected `{expected}`",
            env.subcommand
        )));
    }
    let payload = serde_json::from_value(env.payload)
        .map_err(|e| CliError::Config(format!("{path}: malformed `{expected}` payload: {e}")))?;
    Ok(Envelope {
        schema: env.schema,
        artifact_version: env.artifact_version,
        subcommand: env.subcommand,
        config: env.config,
        mesh_hash: env.mesh_hash,
        timing_seconds: env.timing_seconds,
        oracles: env.oracles,
        payload,
    })
}

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    format!("{x}")
}
