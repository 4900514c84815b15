//! Experiment configuration files.
//!
//! Configs are TOML documents with three optional tables (`space`,
//! `numerics`, `sweeps`) next to the top-level keys `experiment`, `seed` and
//! `output_dir`. Unknown keys anywhere are rejected.

use std::fmt;
use std::path::PathBuf;

use entroq::{
    build_coupled_space, build_frw_space, build_scalar_lattice_space, Axis, ConfigSpace, LatticeSpec, PhysicalConstants,
};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    FluctCovariance,
    EntropyLimit,
    Gibbs,
    MadelungEquivalence,
    WdwOrdering,
    WdwSolve,
    Emergent,
    Suppression,
}

pub struct ExperimentInfo {
    pub experiment: Experiment,
    pub name: &'static str,
    pub summary: &'static str,
    pub required: &'static [&'static str],
}

/// Sorted by name.
pub const CATALOGUE: [ExperimentInfo; 8] = [
    ExperimentInfo {
        experiment: Experiment::Emergent,
        name: "emergent",
        summary: "matter packet evolved along a classical background in emergent time",
        required: &["seed", "output_dir", "numerics.dt", "numerics.steps"],
    },
    ExperimentInfo {
        experiment: Experiment::EntropyLimit,
        name: "entropy-limit",
        summary: "KL and Tsallis divergences against the Fisher functional as the step shrinks",
        required: &["seed", "output_dir", "numerics.samples", "sweeps.dts"],
    },
    ExperimentInfo {
        experiment: Experiment::FluctCovariance,
        name: "fluct-covariance",
        summary: "sampled fluctuation covariance against the inverse kernel",
        required: &["seed", "output_dir", "numerics.dt", "numerics.samples"],
    },
    ExperimentInfo {
        experiment: Experiment::Gibbs,
        name: "gibbs",
        summary: "entropy-regularized minimizer against the closed-form Gibbs law",
        required: &["seed", "output_dir", "numerics.energy"],
    },
    ExperimentInfo {
        experiment: Experiment::MadelungEquivalence,
        name: "madelung-equivalence",
        summary: "hydrodynamic and Schrodinger evolution of one packet under refinement",
        required: &["seed", "output_dir"],
    },
    ExperimentInfo {
        experiment: Experiment::Suppression,
        name: "suppression",
        summary: "scaling of the gravitational corrections with G and hbar",
        required: &["seed", "output_dir", "numerics.dt", "numerics.steps"],
    },
    ExperimentInfo {
        experiment: Experiment::WdwOrdering,
        name: "wdw-ordering",
        summary: "divergence-form against naive factor ordering of the constraint operator",
        required: &["seed", "output_dir"],
    },
    ExperimentInfo {
        experiment: Experiment::WdwSolve,
        name: "wdw-solve",
        summary: "zero mode of the constraint operator and its Madelung split residuals",
        required: &["seed", "output_dir"],
    },
];

impl Experiment {
    pub fn info(self) -> &'static ExperimentInfo {
        CATALOGUE.iter().find(|i| i.experiment == self).expect("every experiment is catalogued")
    }

    pub fn name(self) -> &'static str {
        self.info().name
    }

    pub fn from_name(name: &str) -> Option<Self> {
        CATALOGUE.iter().find(|i| i.name == name).map(|i| i.experiment)
    }
}

fn nearest_experiment(name: &str) -> &'static str {
    CATALOGUE
        .iter()
        .map(|i| (strsim::levenshtein(name, i.name), i.name))
        .min()
        .map(|(_, n)| n)
        .expect("catalogue is not empty")
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSection {
    /// `scalar-lattice`, `gravity`, `frw` or `coupled`.
    pub kind: Option<String>,
    pub sites: Option<usize>,
    pub spacing: Option<f64>,
    pub mass: Option<f64>,
    pub field_min: Option<f64>,
    pub field_max: Option<f64>,
    pub field_points: Option<usize>,
    pub curvature: Option<i8>,
    pub fiducial_volume: Option<f64>,
    pub a_min: Option<f64>,
    pub a_max: Option<f64>,
    pub a_points: Option<usize>,
    pub phi_min: Option<f64>,
    pub phi_max: Option<f64>,
    pub phi_points: Option<usize>,
    /// Row-major spatial metric for the gravity sector.
    pub metric: Option<Vec<f64>>,
    pub hbar: Option<f64>,
    pub grav: Option<f64>,
    pub lapse: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    pub samples: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub energy: Option<Vec<f64>>,
    pub prior: Option<Vec<f64>>,
    pub center: Option<f64>,
    pub width: Option<f64>,
    pub momentum: Option<f64>,
    pub a0: Option<f64>,
    pub direction: Option<String>,
    pub matter_momentum: Option<f64>,
    pub t_max: Option<f64>,
    pub corrections: Option<bool>,
    pub record_every: Option<usize>,
    /// `values`, `decay` or `initial`.
    pub boundary: Option<String>,
    pub left: Option<Vec<f64>>,
    pub right: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepsSection {
    pub dts: Option<Vec<f64>>,
    pub alphas: Option<Vec<f64>>,
    pub grav: Option<Vec<f64>>,
    pub hbar: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub space: SpaceSection,
    #[serde(default)]
    pub numerics: NumericsSection,
    #[serde(default)]
    pub sweeps: SweepsSection,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Issue {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Validation problems collected while reading a config.
#[derive(Debug, Default)]
pub struct Issues(pub Vec<Issue>);

impl Issues {
    pub fn push(&mut self, field: &str, message: impl Into<String>) {
        self.0.push(Issue {
            field: field.to_string(),
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn required<T: Clone>(&mut self, field: &str, value: &Option<T>) -> Option<T> {
        if value.is_none() {
            self.push(field, "required");
        }
        value.clone()
    }

    pub fn positive(&mut self, field: &str, value: Option<f64>, default: f64) -> f64 {
        let v = value.unwrap_or(default);
        if !(v > 0.0 && v.is_finite()) {
            self.push(field, format!("must be positive, got {v}"));
        }
        v
    }

    pub fn finite(&mut self, field: &str, value: Option<f64>, default: f64) -> f64 {
        let v = value.unwrap_or(default);
        if !v.is_finite() {
            self.push(field, format!("must be finite, got {v}"));
        }
        v
    }

    pub fn count(&mut self, field: &str, value: Option<usize>, default: usize, min: usize) -> usize {
        let v = value.unwrap_or(default);
        if v < min {
            self.push(field, format!("must be at least {min}, got {v}"));
        }
        v
    }

    pub fn positive_list(&mut self, field: &str, value: &Option<Vec<f64>>, default: &[f64]) -> Vec<f64> {
        let v = value.clone().unwrap_or_else(|| default.to_vec());
        if v.is_empty() {
            self.push(field, "must not be empty");
        }
        if let Some(bad) = v.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
            self.push(field, format!("entries must be positive, got {bad}"));
        }
        v
    }

    pub fn axis(&mut self, prefix: &str, name: &str, range: (Option<f64>, Option<f64>, Option<usize>), default: (f64, f64, usize)) -> Axis {
        let min = self.finite(&format!("space.{prefix}_min"), range.0, default.0);
        let max = self.finite(&format!("space.{prefix}_max"), range.1, default.1);
        let points = self.count(&format!("space.{prefix}_points"), range.2, default.2, 3);
        match Axis::new(name, min, max, points) {
            Ok(axis) => axis,
            Err(e) => {
                self.push(&format!("space.{prefix}"), e.to_string());
                Axis::new(name, 0.0, 1.0, 3).expect("fallback axis")
            }
        }
    }
}

/// Default axes and couplings for an experiment's space.
#[derive(Clone, Copy)]
pub struct SpaceDefaults {
    pub field: (f64, f64, usize),
    pub curvature: i8,
    pub a: (f64, f64, usize),
    pub phi: (f64, f64, usize),
    pub grav: f64,
}

impl Default for SpaceDefaults {
    fn default() -> Self {
        SpaceDefaults {
            field: (-5.0, 5.0, 101),
            curvature: 1,
            a: (0.5, 3.0, 201),
            phi: (-6.0, 6.0, 241),
            grav: 1.0,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, Issues> {
        toml::from_str(text).map_err(|e| {
            let mut issues = Issues::default();
            let message = e.message().trim().to_string();
            issues.push("config", message);
            issues
        })
    }

    /// Top-level checks shared by every experiment.
    pub fn header(&self, issues: &mut Issues) -> Option<Experiment> {
        issues.required("seed", &self.seed);
        issues.required("output_dir", &self.output_dir);
        let name = issues.required("experiment", &self.experiment)?;
        let experiment = Experiment::from_name(&name);
        if experiment.is_none() {
            issues.push(
                "experiment",
                format!("unknown experiment `{name}`; did you mean `{}`?", nearest_experiment(&name)),
            );
        }
        experiment
    }

    pub fn constants(&self, issues: &mut Issues, defaults: &SpaceDefaults) -> PhysicalConstants {
        let s = &self.space;
        let mut c = PhysicalConstants::default().with_grav(defaults.grav);
        c.hbar = s.hbar.unwrap_or(c.hbar);
        c.grav = s.grav.unwrap_or(c.grav);
        c.lapse = s.lapse.unwrap_or(c.lapse);
        c.alpha = s.alpha.unwrap_or(c.alpha);
        if let Err(e) = c.validate() {
            issues.push("space", e.to_string());
        }
        c
    }

    pub fn kind(&self, allowed: &[&str]) -> Result<String, Issue> {
        let kind = self.space.kind.clone().unwrap_or_else(|| allowed[0].to_string());
        if allowed.contains(&kind.as_str()) {
            Ok(kind)
        } else {
            Err(Issue {
                field: "space.kind".into(),
                message: format!("`{kind}` is not one of {allowed:?}"),
            })
        }
    }

    pub fn scalar_space(&self, issues: &mut Issues, defaults: &SpaceDefaults, constants: PhysicalConstants) -> Option<ConfigSpace> {
        let s = &self.space;
        let axis = issues.axis("field", "phi", (s.field_min, s.field_max, s.field_points), defaults.field);
        let spec = LatticeSpec {
            sites: issues.count("space.sites", s.sites, 1, 1),
            spacing: issues.positive("space.spacing", s.spacing, 1.0),
        };
        let mass = s.mass.unwrap_or(1.0);
        build_scalar_lattice_space(spec, mass, &axis, constants)
            .map_err(|e| issues.push("space", e.to_string()))
            .ok()
    }

    pub fn frw_space(&self, issues: &mut Issues, defaults: &SpaceDefaults, constants: PhysicalConstants) -> Option<ConfigSpace> {
        let s = &self.space;
        let axis = issues.axis("a", "a", (s.a_min, s.a_max, s.a_points), defaults.a);
        let volume = issues.positive("space.fiducial_volume", s.fiducial_volume, 1.0);
        build_frw_space(s.curvature.unwrap_or(defaults.curvature), volume, &axis, constants)
            .map_err(|e| issues.push("space", e.to_string()))
            .ok()
    }

    pub fn coupled_space(&self, issues: &mut Issues, defaults: &SpaceDefaults, constants: PhysicalConstants) -> Option<ConfigSpace> {
        let s = &self.space;
        let frw = self.frw_space(issues, defaults, constants)?;
        let phi = issues.axis("phi", "phi", (s.phi_min, s.phi_max, s.phi_points), defaults.phi);
        build_coupled_space(&frw, &phi, constants)
            .map_err(|e| issues.push("space", e.to_string()))
            .ok()
    }

    pub fn metric(&self, issues: &mut Issues) -> Option<[[f64; 3]; 3]> {
        let m = issues.required("space.metric", &self.space.metric)?;
        if m.len() != 9 {
            issues.push("space.metric", format!("needs 9 entries, got {}", m.len()));
            return None;
        }
        let mut h = [[0.0; 3]; 3];
        for (k, v) in m.iter().enumerate() {
            h[k / 3][k % 3] = *v;
        }
        Some(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalogue_is_sorted_and_complete() {
        let names: Vec<&str> = CATALOGUE.iter().map(|i| i.name).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        for info in &CATALOGUE {
            assert_eq!(Experiment::from_name(info.name), Some(info.experiment));
            assert_eq!(info.experiment.name(), info.name);
        }
    }

    #[test]
    fn misspelled_experiment_gets_a_suggestion() {
        let cfg = ExperimentConfig::parse("experiment = \"gibs\"\nseed = 1\noutput_dir = \"x\"").unwrap();
        let mut issues = Issues::default();
        assert!(cfg.header(&mut issues).is_none());
        assert!(issues.0[0].message.contains("`gibbs`"), "{:?}", issues.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::parse("experiment = \"gibbs\"\n[numerics]\nstep = 3").unwrap_err();
        assert!(err.0[0].message.contains("step"), "{:?}", err.0);
    }

    #[test]
    fn missing_seed_is_reported() {
        let cfg = ExperimentConfig::parse("experiment = \"gibbs\"\noutput_dir = \"x\"").unwrap();
        let mut issues = Issues::default();
        cfg.header(&mut issues);
        assert_eq!(issues.0[0].field, "seed");
    }
}
