//! Experiment runner behind the `entroq` binary.

pub mod config;
pub mod manifest;
pub mod pipelines;

use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use config::{ExperimentConfig, Issue, CATALOGUE};
use manifest::Artifacts;
use pipelines::Plan;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum Failure {
    #[error("invalid configuration:\n{}", list_issues(.0))]
    Invalid(Vec<Issue>),
    #[error("numerical failure: {0}")]
    Numerical(#[from] entroq::Error),
}

fn list_issues(issues: &[Issue]) -> String {
    issues.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n")
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

fn invalid(field: &str, message: String) -> Failure {
    Failure::Invalid(vec![Issue {
        field: field.into(),
        message,
    }])
}

/// Read and fully validate a config file.
pub fn load(path: &Path) -> Result<(ExperimentConfig, Plan), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid("config", format!("{}: {e}", path.display())))?;
    let cfg = ExperimentConfig::parse(&text).map_err(|i| Failure::Invalid(i.0))?;
    let plan = pipelines::prepare(&cfg).map_err(|i| Failure::Invalid(i.0))?;
    Ok((cfg, plan))
}

pub struct RunSummary {
    pub manifest_path: PathBuf,
    pub manifest: serde_json::Value,
    pub passed: bool,
}

/// Validate, execute and write the manifest next to the artifacts.
pub fn run(path: &Path) -> Result<RunSummary, Failure> {
    let (cfg, plan) = load(path)?;
    let dir = cfg.output_dir.clone().expect("validated");
    let seed = cfg.seed.expect("validated");
    let mut out =
        Artifacts::create_dir(&dir).map_err(|e| invalid("output_dir", format!("{}: {e}", dir.display())))?;
    let start = Instant::now();
    let outcome = pipelines::execute(&plan, seed, &mut out)?;
    let seconds = start.elapsed().as_secs_f64();
    let manifest = manifest::manifest(&cfg, &outcome, &out, rayon::current_num_threads(), seconds);
    let manifest_path = out.dir().join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&manifest_path, text + "\n").map_err(entroq::Error::from)?;
    Ok(RunSummary {
        manifest_path,
        manifest,
        passed: outcome.passed(),
    })
}

/// Sorted table of experiments with their required keys.
pub fn listing() -> String {
    let width = CATALOGUE.iter().map(|i| i.name.len()).max().unwrap_or(0);
    let mut s = String::new();
    for info in &CATALOGUE {
        s += &format!("{:<width$}  {}\n{:<width$}  requires: {}\n", info.name, info.summary, "", info.required.join(", "));
    }
    s
}

/// Worker cap from `ENTROQ_THREADS`, if set.
pub fn thread_limit(value: Option<&str>) -> Result<Option<usize>, Failure> {
    match value {
        None => Ok(None),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(invalid("ENTROQ_THREADS", format!("must be a positive integer, got `{v}`"))),
        },
    }
}
