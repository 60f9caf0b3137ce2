use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::{ExperimentConfig, Failure};

/// In-memory artifact set, written out in one go together with a manifest.
pub struct Artifacts {
    config: Value,
    hash: String,
    seed: u64,
    files: Vec<(String, Vec<u8>)>,
}

/// Fixed-width scientific notation, 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl Artifacts {
    pub fn new(config: &ExperimentConfig, hash: &str) -> Self {
        let mut config = serde_json::to_value(config).expect("config serialises");
        if let Value::Object(m) = &mut config {
            m.remove("out");
        }
        let seed = config_seed(&config);
        Self {
            config,
            hash: hash.to_owned(),
            seed,
            files: Vec::new(),
        }
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    /// JSON artifact; objects get `config_hash` and `seed` keys added,
    /// anything else is wrapped under `result`.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let value = serde_json::to_value(value).map_err(|e| Failure::Experiment(e.to_string()))?;
        let mut obj = match value {
            Value::Object(m) => m,
            other => {
                let mut m = serde_json::Map::new();
                m.insert("result".into(), other);
                m
            }
        };
        obj.insert("config_hash".into(), Value::String(self.hash.clone()));
        obj.insert("seed".into(), Value::from(self.seed));
        let mut bytes = serde_json::to_vec_pretty(&Value::Object(obj)).map_err(|e| Failure::Experiment(e.to_string()))?;
        bytes.push(b'\n');
        self.files.push((name.to_owned(), bytes));
        Ok(())
    }

    pub fn csv<const N: usize>(&mut self, name: &str, header: [&str; N], rows: &[[f64; N]]) -> Result<(), Failure> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Failure::Experiment(e.to_string());
        w.write_record(header).map_err(err)?;
        for row in rows {
            w.write_record(row.iter().map(|x| fmt_f64(*x))).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Failure::Experiment(e.to_string()))?;
        self.files.push((name.to_owned(), bytes));
        Ok(())
    }

    /// Write every file plus `manifest.json` listing hashes of each.
    pub fn flush(self, dir: &Path) -> Result<Vec<String>, Failure> {
        let io = |e: std::io::Error| Failure::Experiment(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        let mut listing = Vec::new();
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes).map_err(io)?;
            let digest: String = Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect();
            listing.push(serde_json::json!({ "file": name, "sha256": digest }));
        }
        let manifest = serde_json::json!({
            "config": self.config,
            "config_hash": self.hash,
            "seed": self.seed,
            "version": env!("CARGO_PKG_VERSION"),
            "artifacts": listing,
        });
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| Failure::Experiment(e.to_string()))?;
        bytes.push(b'\n');
        std::fs::write(dir.join("manifest.json"), bytes).map_err(io)?;
        let mut names: Vec<String> = self.files.into_iter().map(|(n, _)| n).collect();
        names.push("manifest.json".into());
        Ok(names)
    }
}

fn config_seed(config: &Value) -> u64 {
    config.get("seed").and_then(Value::as_u64).unwrap_or(0)
}
