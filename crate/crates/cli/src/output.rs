//! Files written by a run. Payload files are deterministic; wall-clock data
//! lives only in the manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{ExperimentConfig, HarnessError};

/// Output directory plus the list of files written so far.
#[derive(Debug)]
pub struct Sink {
    dir: PathBuf,
    files: Vec<String>,
}

impl Sink {
    pub fn new(dir: &Path) -> Result<Self, HarnessError> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), HarnessError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| HarnessError::Io(format!("cannot write {}: {e}", path.display())))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), HarnessError> {
        let text = serde_json::to_string_pretty(value).expect("report serialises");
        self.write(name, &(text + "\n"))
    }

    pub fn write_csv(&mut self, name: &str, table: &Csv) -> Result<(), HarnessError> {
        self.write(name, &table.text)
    }
}

/// Minimal CSV builder with a fixed header; numbers use shortest round-trip form.
#[derive(Debug, Clone)]
pub struct Csv {
    columns: usize,
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { columns: header.len(), text: header.join(",") + "\n" }
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.columns, "row width");
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseTiming {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Default)]
pub struct Phases {
    entries: Vec<PhaseTiming>,
}

impl Phases {
    pub fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.entries.push(PhaseTiming { name: name.to_string(), seconds: start.elapsed().as_secs_f64() });
        out
    }

    pub fn entries(&self) -> &[PhaseTiming] {
        &self.entries
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub status: String,
    pub exit_code: i32,
    pub message: Option<String>,
    pub config_hash: Option<String>,
    pub config: Option<serde_json::Value>,
    pub phases: Vec<PhaseTiming>,
    pub outputs: Vec<String>,
    pub started_unix: u64,
}

/// SHA-256 of the canonical TOML form of the effective configuration, with
/// the output directory blanked so relocated reruns hash alike.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.clone();
    c.output_dir = Default::default();
    let digest = Sha256::digest(c.to_toml().as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    pub fn new(subcommand: &str, cfg: Option<&ExperimentConfig>, started_unix: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            status: "ok".into(),
            exit_code: 0,
            message: None,
            config_hash: cfg.map(config_hash),
            config: cfg.map(|c| serde_json::to_value(c).expect("config serialises")),
            phases: Vec::new(),
            outputs: Vec::new(),
            started_unix,
        }
    }

    pub fn fail(&mut self, err: &HarnessError) {
        self.status = err.status().into();
        self.exit_code = err.exit_code();
        self.message = Some(err.to_string());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialises") + "\n"
    }
}
