use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
    Above,
    /// `|measured − reference| ≤ tolerance`.
    AbsWithin,
    /// `|measured − reference| ≤ tolerance · |reference|`.
    RelWithin,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub reference: Option<f64>,
    pub relation: Relation,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, measured: f64, reference: Option<f64>, relation: Relation, tolerance: f64) -> Self {
        let r = reference.unwrap_or(0.0);
        let pass = match relation {
            Relation::AtMost => measured <= tolerance,
            Relation::AtLeast => measured >= tolerance,
            Relation::Above => measured > tolerance,
            Relation::AbsWithin => (measured - r).abs() <= tolerance,
            Relation::RelWithin => (measured - r).abs() <= tolerance * r.abs(),
        };
        Check {
            name: name.to_string(),
            measured,
            reference,
            relation,
            tolerance,
            pass,
        }
    }

    pub fn at_most(name: &str, measured: f64, tolerance: f64) -> Self {
        Check::new(name, measured, None, Relation::AtMost, tolerance)
    }

    pub fn at_least(name: &str, measured: f64, tolerance: f64) -> Self {
        Check::new(name, measured, None, Relation::AtLeast, tolerance)
    }

    pub fn above(name: &str, measured: f64, tolerance: f64) -> Self {
        Check::new(name, measured, None, Relation::Above, tolerance)
    }

    pub fn abs_within(name: &str, measured: f64, reference: f64, tolerance: f64) -> Self {
        Check::new(name, measured, Some(reference), Relation::AbsWithin, tolerance)
    }

    pub fn rel_within(name: &str, measured: f64, reference: f64, tolerance: f64) -> Self {
        Check::new(name, measured, Some(reference), Relation::RelWithin, tolerance)
    }
}

/// Checks and extra measured values produced by one pipeline.
#[derive(Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub measurements: BTreeMap<String, f64>,
}

impl Outcome {
    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn measure(&mut self, name: &str, value: f64) {
        self.measurements.insert(name.to_string(), value);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Output directory that remembers every file it hands out.
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    pub fn create_dir(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn file(&mut self, name: &str) -> entroq::Result<BufWriter<File>> {
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    pub fn write(&mut self, name: &str, text: &str) -> entroq::Result<()> {
        let mut f = self.file(name)?;
        f.write_all(text.as_bytes())?;
        f.flush()?;
        Ok(())
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

fn prune_nulls(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.retain(|_, x| !x.is_null());
            map.values_mut().for_each(prune_nulls);
        }
        Value::Array(items) => items.iter_mut().for_each(prune_nulls),
        _ => {}
    }
}

/// Manifest document. Keys are emitted in sorted order; unset config keys
/// are left out of the echo.
pub fn manifest(config: &ExperimentConfig, outcome: &Outcome, artifacts: &Artifacts, threads: usize, seconds: f64) -> Value {
    let mut echo = serde_json::to_value(config).expect("config serializes");
    prune_nulls(&mut echo);
    json!({
        "config": echo,
        "versions": {
            "entroq": env!("CARGO_PKG_VERSION"),
            "manifest_format": 1,
        },
        "threads": threads,
        "wall_clock_seconds": seconds,
        "checks": outcome.checks,
        "measurements": outcome.measurements,
        "artifacts": artifacts.files(),
        "pass": outcome.passed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations_decide_pass() {
        assert!(Check::at_most("x", 1.0, 1.0).pass);
        assert!(!Check::above("x", 1.0, 1.0).pass);
        assert!(Check::at_least("x", 3.5, 3.5).pass);
        assert!(Check::abs_within("x", 1.04, 1.0, 0.05).pass);
        assert!(!Check::rel_within("x", 2.1, 2.0, 0.03).pass);
    }

    #[test]
    fn manifest_keys_are_sorted() {
        let cfg = ExperimentConfig::parse("experiment = \"gibbs\"\nseed = 1\noutput_dir = \"x\"").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let art = Artifacts::create_dir(dir.path()).unwrap();
        let text = serde_json::to_string(&manifest(&cfg, &Outcome::default(), &art, 1, 0.0)).unwrap();
        let keys = ["\"artifacts\"", "\"checks\"", "\"config\"", "\"measurements\"", "\"pass\""];
        let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{text}");
    }
}
