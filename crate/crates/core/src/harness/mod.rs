//! Experiment drivers behind the command-line tool, and the report format
//! they share.

mod experiments;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use experiments::*;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the canonical JSON parameters.
    pub config_hash: String,
    pub inputs: Vec<String>,
}

/// One experiment's output: a table plus a summary object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub parameters: Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub summary: Value,
    /// Per-item problems that did not stop the run.
    pub soft_failures: Vec<String>,
    pub provenance: Provenance,
}

pub fn config_hash(parameters: &Value) -> String {
    // serde_json maps are key-sorted, so this text is canonical
    let text = serde_json::to_string(parameters).expect("values serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl ExperimentReport {
    pub fn new(experiment: &str, parameters: Value, columns: &[&str], inputs: Vec<String>) -> Self {
        Self {
            experiment: experiment.to_string(),
            provenance: Provenance {
                config_hash: config_hash(&parameters),
                inputs,
            },
            parameters,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            summary: Value::Null,
            soft_failures: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Column `name` of every row.
    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[k]).collect())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::InvalidConfig(format!("csv: {e}"));
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(cell)).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::InvalidConfig(format!("csv: {e}")))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `<experiment>.csv` and `<experiment>.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        let csv_path = dir.join(format!("{}.csv", self.experiment));
        let json_path = dir.join(format!("{}.json", self.experiment));
        std::fs::write(&csv_path, self.to_csv()?).map_err(|e| Error::file(&csv_path, e))?;
        std::fs::write(&json_path, self.to_json()?).map_err(|e| Error::file(&json_path, e))?;
        Ok((csv_path, json_path))
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Runs `f` on a pool of `workers` threads (0 = rayon's default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = config_hash(&json!({"angles": [1, 2], "sensor": "vlp16"}));
        assert_eq!(a, config_hash(&json!({"sensor": "vlp16", "angles": [1, 2]})));
        assert_ne!(a, config_hash(&json!({"sensor": "hdl64", "angles": [1, 2]})));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn csv_quotes_and_blanks() {
        let mut r = ExperimentReport::new("t", json!({}), &["a", "b"], vec![]);
        r.push(vec![json!("x,y"), Value::Null]);
        r.push(vec![json!(1.5), json!(true)]);
        let text = String::from_utf8(r.to_csv().unwrap()).unwrap();
        assert_eq!(text, "a,b\n\"x,y\",\n1.5,true\n");
    }

    #[test]
    fn writes_both_files() {
        let dir = tempfile::tempdir().unwrap();
        let r = ExperimentReport::new("demo", json!({"k": 1}), &["a"], vec![]);
        let (c, j) = r.write(dir.path()).unwrap();
        assert!(c.exists() && j.exists());
        let back: ExperimentReport = serde_json::from_str(&std::fs::read_to_string(j).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
