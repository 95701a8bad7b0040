//! Reproducible experiment runs for the wavelet renormalization group.
//!
//! A run takes a [`RunConfig`], validates it, computes every experiment in
//! parallel and writes one directory per experiment plus a `manifest.json`
//! listing checks, summaries and the digest of every file written.

pub mod config;
pub mod experiments;
pub mod output;
pub mod presets;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use config::{validate_config, Experiment, Lattice, RunConfig, Violation};
pub use experiments::{execute, Check, Outcome};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration:{}", .0.iter().map(|v| format!("\n  {v}")).collect::<String>())]
    Validation(Vec<Violation>),
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("experiment {experiment}: {source}")]
    Compute { experiment: String, source: wrg_core::Error },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    /// Process exit status: 2 for bad input, 3 for failed computations,
    /// 4 for filesystem errors.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Validation(_) | Self::Parse(_) => 2,
            Self::Compute { .. } => 3,
            Self::Io { .. } => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub name: String,
    pub kind: String,
    pub seconds: f64,
    pub checks: Vec<Check>,
    pub summary: Value,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub code_version: String,
    pub config: RunConfig,
    pub wall_clock_seconds: f64,
    pub all_checks_passed: bool,
    pub experiments: Vec<ExperimentRecord>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn failed_checks(&self) -> impl Iterator<Item = (&str, &Check)> {
        self.experiments
            .iter()
            .flat_map(|e| e.checks.iter().filter(|c| !c.passed).map(move |c| (e.name.as_str(), c)))
    }
}

/// Validates and runs `config`, writing into `out`. `threads = None` uses
/// the global rayon pool.
pub fn run_experiment(config: &RunConfig, out: &Path, threads: Option<usize>) -> Result<RunManifest, RunError> {
    let violations = validate_config(config);
    if !violations.is_empty() {
        return Err(RunError::Validation(violations));
    }
    let start = Instant::now();
    let compute = || -> Vec<Result<(f64, Outcome), RunError>> {
        config
            .experiments
            .par_iter()
            .map(|e| {
                let t = Instant::now();
                execute(e)
                    .map(|o| (t.elapsed().as_secs_f64(), o))
                    .map_err(|source| RunError::Compute { experiment: e.name().to_string(), source })
            })
            .collect()
    };
    let results = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool construction")
            .install(compute),
        None => compute(),
    };

    fs::create_dir_all(out).map_err(|e| RunError::io(out, e))?;
    let mut records = Vec::new();
    let mut inventory = Vec::new();
    for (exp, result) in config.experiments.iter().zip(results) {
        let (seconds, outcome) = result?;
        let dir = out.join(exp.name());
        fs::create_dir_all(&dir).map_err(|e| RunError::io(&dir, e))?;
        let mut names = Vec::new();
        for (file, bytes) in &outcome.files {
            let path = dir.join(file);
            fs::write(&path, bytes).map_err(|e| RunError::io(&path, e))?;
            let rel = format!("{}/{file}", exp.name());
            inventory.push(FileEntry { path: rel.clone(), sha256: output::sha256_hex(bytes), bytes: bytes.len() as u64 });
            names.push(rel);
        }
        records.push(ExperimentRecord {
            name: exp.name().to_string(),
            kind: exp.kind().to_string(),
            seconds,
            checks: outcome.checks,
            summary: outcome.summary,
            files: names,
        });
    }
    let manifest = RunManifest {
        format_version: config::FORMAT_VERSION,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        all_checks_passed: records.iter().all(|r| r.checks.iter().all(|c| c.passed)),
        experiments: records,
        files: inventory,
    };
    let path = out.join(MANIFEST);
    let text = serde_json::to_vec_pretty(&manifest).expect("manifests serialize");
    fs::write(&path, text).map_err(|e| RunError::io(&path, e))?;
    Ok(manifest)
}
