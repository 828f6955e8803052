//! Experiment orchestration behind the `sclab` binary: configuration, one runner
//! per subcommand, CSV/JSON emission and the run manifest.

pub mod config;
pub mod experiments;
pub mod output;

pub use config::{ExperimentConfig, Overrides};
pub use experiments::{run, Command};
pub use output::{Phases, RunManifest, Sink};

use std::path::{Path, PathBuf};

/// What a run produced: the manifest (also written to `manifest.json` when an
/// output directory is known) and the runner's result.
#[derive(Debug)]
pub struct Outcome {
    pub manifest: RunManifest,
    pub result: Result<(), HarnessError>,
    pub output_dir: Option<PathBuf>,
}

fn load(config: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(overrides)?;
    Ok(cfg)
}

/// Loads the config, runs one subcommand and always emits a manifest. When the
/// config cannot be loaded and no `--output-dir` was given, the manifest goes
/// to stderr instead.
pub fn execute(cmd: Command, config: Option<&Path>, overrides: &Overrides) -> Outcome {
    let started = output::unix_now();
    let cfg = match load(config, overrides) {
        Ok(c) => c,
        Err(e) => {
            let mut manifest = RunManifest::new(cmd.name(), None, started);
            manifest.fail(&e);
            let output_dir = overrides.output_dir.clone();
            let written = output_dir.as_deref().map(|d| Sink::new(d).and_then(|mut s| s.write("manifest.json", &manifest.to_json())));
            if !matches!(written, Some(Ok(()))) {
                eprint!("{}", manifest.to_json());
            }
            return Outcome { manifest, result: Err(e), output_dir };
        }
    };
    let mut manifest = RunManifest::new(cmd.name(), Some(&cfg), started);
    let mut phases = Phases::default();
    let mut sink = match Sink::new(&cfg.output_dir) {
        Ok(s) => s,
        Err(e) => {
            manifest.fail(&e);
            eprint!("{}", manifest.to_json());
            return Outcome { manifest, result: Err(e), output_dir: Some(cfg.output_dir.clone()) };
        }
    };
    let mut result = run(cmd, &cfg, &mut sink, &mut phases);
    manifest.phases = phases.entries().to_vec();
    manifest.outputs = sink.files().to_vec();
    manifest.outputs.push("manifest.json".into());
    if let Err(e) = &result {
        manifest.fail(e);
    }
    if let Err(e) = sink.write("manifest.json", &manifest.to_json()) {
        if result.is_ok() {
            manifest.fail(&e);
            result = Err(e);
        }
    }
    Outcome { manifest, result, output_dir: Some(cfg.output_dir) }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("experiment failed: {0}")]
    Experiment(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl HarnessError {
    /// 2 for anything the user can fix in the config or environment, 3 for
    /// mathematical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io(_) => 2,
            HarnessError::Experiment(_) => 3,
        }
    }

    pub fn status(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config_error",
            HarnessError::Io(_) => "io_error",
            HarnessError::Experiment(_) => "experiment_failure",
        }
    }
}

impl From<sclab_core::Error> for HarnessError {
    fn from(e: sclab_core::Error) -> Self {
        HarnessError::Experiment(e.to_string())
    }
}
