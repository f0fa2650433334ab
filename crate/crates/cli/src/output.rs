//! Output directory handling. Files are written atomically (temporary file
//! in the target directory, then rename) and every file names the run
//! manifest, which is written last.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

pub const MANIFEST: &str = "run_manifest.json";

/// Parameters echoed for reproduction. Only `wall_clock_seconds` differs
/// between identical runs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub parameters: BTreeMap<String, Value>,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    /// Set when the run stopped early; outputs are then partial.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_clock_seconds: f64,
}

pub struct Output {
    dir: PathBuf,
    written: Vec<String>,
    inputs: Vec<String>,
    started: Instant,
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            inputs: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn add_input(&mut self, path: &Path) {
        self.inputs.push(path.display().to_string());
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(rel);
        let parent = path.parent().expect("joined path has a parent");
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
        let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&path)
            .with_context(|| format!("writing {}", path.display()))?;
        self.written.push(rel.to_string());
        Ok(())
    }

    /// Writes `{"manifest": ..., <fields of value>}` as pretty JSON.
    pub fn write_json(&mut self, rel: &str, value: &impl Serialize) -> Result<()> {
        let mut doc = serde_json::Map::new();
        doc.insert("manifest".into(), json!(MANIFEST));
        match serde_json::to_value(value)? {
            Value::Object(fields) => doc.extend(fields),
            other => {
                doc.insert("data".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(doc))?;
        text.push('\n');
        self.write_bytes(rel, text.as_bytes())
    }

    /// CSV with a leading `# manifest: ...` comment line.
    pub fn write_csv(&mut self, rel: &str, header: &str, rows: &[String]) -> Result<()> {
        let mut text = format!("# manifest: {MANIFEST}\n{header}\n");
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        self.write_bytes(rel, text.as_bytes())
    }

    pub fn has_outputs(&self) -> bool {
        !self.written.is_empty()
    }

    pub fn finish(
        mut self,
        subcommand: &str,
        parameters: BTreeMap<String, Value>,
        seed: Option<u64>,
        error: Option<String>,
    ) -> Result<()> {
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            parameters,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: std::mem::take(&mut self.inputs),
            outputs: std::mem::take(&mut self.written),
            error,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        self.write_bytes(MANIFEST, text.as_bytes())
    }
}
