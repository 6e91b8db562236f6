//! Artifact formatting and the single file writer.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dataset::SourceMeta;
use crate::error::{io_err, CliError, CliResult};

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn quote(cell: &str) -> std::borrow::Cow<'_, str> {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\"")).into()
    } else {
        cell.into()
    }
}

/// Builds CSV text in memory.
#[derive(Debug, Clone)]
pub struct CsvText {
    text: String,
    width: usize,
}

impl CsvText {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut text = header.iter().map(|h| h.as_ref()).collect::<Vec<_>>().join(",");
        text.push('\n');
        Self { text, width: header.len() }
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) {
        debug_assert_eq!(cells.len(), self.width);
        let line = cells.iter().map(|c| quote(c.as_ref())).collect::<Vec<_>>().join(",");
        self.text.push_str(&line);
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StageStatus {
    pub stage: String,
    /// `ok`, `skipped`, or `failed`.
    pub status: String,
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub created_utc: String,
    pub sources: Vec<SourceMeta>,
    pub stage_status: Vec<StageStatus>,
    pub complete: bool,
}

/// Owns the output directory; every artifact goes through `write`.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    written: Vec<String>,
}

impl ArtifactWriter {
    pub fn create(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(io_err(&path))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn write_manifest(&mut self, manifest: &Manifest) -> CliResult<()> {
        let json = serde_json::to_string_pretty(manifest).map_err(|e| CliError::Serialize(e.to_string()))?;
        self.write("MANIFEST.json", &(json + "\n"))
    }
}
