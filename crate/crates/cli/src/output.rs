//! Atomic file output, CSV rows and the run manifest sidecar.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use limbkin_core::geometry::ASSUMED_PARAMETERS;
use limbkin_core::Config;
use serde::Serialize;

/// Writes via a sibling temp file and a rename so readers never see partial output.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).with_context(|| format!("cannot create {}", tmp.display()))?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path).with_context(|| format!("cannot move output into {}", path.display()))?;
    Ok(())
}

/// Decimal rounded to 12 significant digits, or an empty field for missing or non-finite values.
pub fn num(x: impl Into<Option<f64>>) -> String {
    match x.into() {
        Some(v) if v.is_finite() => {
            let rounded: f64 = format!("{v:.11e}").parse().unwrap_or(v);
            if rounded == 0.0 {
                "0".into()
            } else {
                format!("{rounded}")
            }
        }
        _ => String::new(),
    }
}

pub fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// Where the configuration came from.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", content = "path", rename_all = "snake_case")]
pub enum ConfigSource {
    BuiltIn,
    File(PathBuf),
}

#[derive(Debug, Serialize)]
pub struct AssumedParameter {
    pub name: &'static str,
    pub note: &'static str,
}

/// Sidecar describing one run: what was asked, with which configuration, and what it wrote.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` overrides the clock.
    pub timestamp: u64,
    pub subcommand: String,
    pub args: Vec<String>,
    pub config_source: ConfigSource,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    pub assumed_parameters: Vec<AssumedParameter>,
}

impl RunManifest {
    pub fn new(subcommand: &str, args: Vec<String>, source: ConfigSource, cfg: &Config) -> Result<Self> {
        let timestamp = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0));
        Ok(Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            timestamp,
            subcommand: subcommand.to_owned(),
            args,
            config_source: source,
            config: serde_json::from_str(&cfg.to_canonical_json())?,
            outputs: Vec::new(),
            assumed_parameters: ASSUMED_PARAMETERS
                .iter()
                .map(|&(name, note)| AssumedParameter { name, note })
                .collect(),
        })
    }

    pub fn file_name(&self) -> String {
        format!("{}.manifest.json", self.subcommand)
    }
}

/// Collects outputs for one run and writes them with the manifest last.
pub struct Outputs {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Outputs {
    pub fn new(dir: PathBuf, manifest: RunManifest) -> Self {
        Self { dir, manifest }
    }

    pub fn manifest_name(&self) -> String {
        self.manifest.file_name()
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        atomic_write(&path, bytes)?;
        self.manifest.outputs.push(name.to_owned());
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(self) -> Result<PathBuf> {
        let path = self.dir.join(self.manifest.file_name());
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        atomic_write(&path, text.as_bytes())?;
        Ok(path)
    }
}
