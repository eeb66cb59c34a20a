//! Output directory handling: CSV files, the resolved-config echo and the JSON
//! metadata sidecar. Only the sidecar carries a timestamp.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub struct OutDir {
    root: PathBuf,
    written: Vec<(String, String)>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes `name` through `fill` and records its SHA-256.
    pub fn write<F>(&mut self, name: &str, fill: F) -> Result<PathBuf, CliError>
    where
        F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
    {
        let path = self.path(name);
        let mut buf = Vec::new();
        fill(&mut buf).map_err(|e| CliError::io(&path, e))?;
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(&buf)
            .and_then(|_| w.flush())
            .map_err(|e| CliError::io(&path, e))?;
        self.written.push((name.to_string(), hex::encode(Sha256::digest(&buf))));
        Ok(path)
    }

    /// `<subcommand>.meta.json` listing every file written so far.
    pub fn write_sidecar(&mut self, subcommand: &str, config_text: &str, extra: Value) -> Result<PathBuf, CliError> {
        let millis = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        let outputs: Map<String, Value> = self
            .written
            .iter()
            .map(|(n, h)| (n.clone(), Value::String(h.clone())))
            .collect();
        let meta = json!({
            "tool": "optomech",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": subcommand,
            "created_unix_ms": millis,
            "config_sha256": hex::encode(Sha256::digest(config_text.as_bytes())),
            "outputs": outputs,
            "result": extra,
        });
        let path = self.path(&format!("{subcommand}.meta.json"));
        let text = serde_json::to_string_pretty(&meta).expect("metadata is plain JSON");
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
