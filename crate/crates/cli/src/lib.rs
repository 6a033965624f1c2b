//! Experiment runner for the mean-field Langevin laboratory.
//!
//! A run reads one TOML config, executes the named experiment on a
//! bounded worker pool and writes a result directory:
//!
//! - `manifest.json`: config hash, seed, versions, wall time, invariants;
//! - result CSVs (byte-identical for identical config and seed);
//! - `summary.md` and `plot_*.csv`, regenerated by [`report::render`].

pub mod bounds_cmd;
pub mod config;
pub mod experiments;
pub mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use config::{ExperimentConfig, ExperimentKind, LoadedConfig};
pub use experiments::{Invariant, Outcome};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Numeric(#[from] mflab_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Process exit statuses.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const INVARIANT_FAILED: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERIC: i32 = 3;
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => exit::CONFIG,
            CliError::Numeric(_) => exit::NUMERIC,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub key: String,
    pub value: Value,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub experiment: ExperimentKind,
    pub config_hash: String,
    pub seed: u64,
    pub workers: usize,
    pub wall_time_s: f64,
    pub passed: bool,
    pub invariants: Vec<Invariant>,
    pub results: Value,
    pub files: Vec<String>,
    pub settings: Vec<Setting>,
    pub config: ExperimentConfig,
}

/// Command-line overrides of config fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl RunResult {
    pub fn exit_code(&self) -> i32 {
        if self.manifest.passed {
            exit::PASS
        } else {
            exit::INVARIANT_FAILED
        }
    }
}

fn settings(cfg: &ExperimentConfig) -> Vec<Setting> {
    let v = serde_json::to_value(cfg).expect("configs serialize");
    config::DEFAULTS
        .iter()
        .map(|(key, why)| Setting {
            key: key.to_string(),
            value: key.split('.').fold(&v, |node, part| &node[part]).clone(),
            rationale: why.to_string(),
        })
        .collect()
}

/// Runs a loaded config and writes its result directory.
pub fn run(loaded: &LoadedConfig, overrides: &Overrides) -> Result<RunResult, CliError> {
    let mut cfg = loaded.config.clone();
    if let Some(s) = overrides.seed {
        cfg.seed = s;
    }
    if let Some(w) = overrides.workers {
        cfg.workers = w;
    }
    let dir = overrides
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(|p| loaded.base.join(p)))
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set `output`".into()))?;
    cfg.output = None;
    cfg.validate()?;
    let model = cfg
        .model
        .build(&loaded.base)
        .map_err(|e| match e {
            CliError::Numeric(inner) => CliError::Config(format!("model: {inner}")),
            other => other,
        })?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Config(format!("workers: {e}")))?;
    let start = Instant::now();
    let outcome = pool.install(|| experiments::run_experiment(&cfg, model))?;
    let wall = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(&dir)?;
    for f in &outcome.files {
        std::fs::write(dir.join(&f.name), &f.bytes)?;
    }
    let manifest = Manifest {
        tool: "mflab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        core_version: mflab_core::VERSION.into(),
        experiment: cfg.experiment,
        config_hash: cfg.hash(),
        seed: cfg.seed,
        workers: cfg.workers,
        wall_time_s: wall,
        passed: outcome.invariants.iter().all(|i| i.passed),
        invariants: outcome.invariants,
        results: outcome.results,
        files: outcome.files.iter().map(|f| f.name.clone()).collect(),
        settings: settings(&cfg),
        config: cfg,
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Numeric(e.into()))?;
    text.push('\n');
    std::fs::write(dir.join(report::MANIFEST), text)?;
    report::render(&dir)?;
    Ok(RunResult { dir, manifest })
}

/// Loads a config file and runs it.
pub fn run_file(path: &Path, overrides: &Overrides) -> Result<RunResult, CliError> {
    run(&ExperimentConfig::load(path)?, overrides)
}
