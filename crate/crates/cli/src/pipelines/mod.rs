//! One pipeline per experiment. `prepare` resolves a config into a plan
//! without running any numerics; `execute` runs the plan and writes its
//! artifacts.

mod emergent;
mod gibbs;
mod madelung;
mod sampling;
mod wdw;

use crate::config::{Experiment, ExperimentConfig, Issues};
use crate::manifest::{Artifacts, Outcome};

pub enum Plan {
    FluctCovariance(sampling::CovariancePlan),
    EntropyLimit(sampling::LimitPlan),
    Gibbs(gibbs::GibbsPlan),
    MadelungEquivalence(madelung::EquivalencePlan),
    WdwOrdering(wdw::OrderingPlan),
    WdwSolve(wdw::SolvePlan),
    Emergent(emergent::EmergentPlan),
    Suppression(emergent::SuppressionPlan),
}

/// Validate a config completely, returning every problem found.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Plan, Issues> {
    let mut issues = Issues::default();
    let experiment = cfg.header(&mut issues);
    let plan = experiment.and_then(|e| match e {
        Experiment::FluctCovariance => sampling::covariance(cfg, &mut issues).map(Plan::FluctCovariance),
        Experiment::EntropyLimit => sampling::limit(cfg, &mut issues).map(Plan::EntropyLimit),
        Experiment::Gibbs => gibbs::plan(cfg, &mut issues).map(Plan::Gibbs),
        Experiment::MadelungEquivalence => madelung::plan(cfg, &mut issues).map(Plan::MadelungEquivalence),
        Experiment::WdwOrdering => wdw::ordering(cfg, &mut issues).map(Plan::WdwOrdering),
        Experiment::WdwSolve => wdw::solve(cfg, &mut issues).map(Plan::WdwSolve),
        Experiment::Emergent => emergent::plan(cfg, &mut issues).map(Plan::Emergent),
        Experiment::Suppression => emergent::suppression(cfg, &mut issues).map(Plan::Suppression),
    });
    match plan {
        Some(p) if issues.is_empty() => Ok(p),
        _ => {
            if issues.is_empty() {
                issues.push("config", "could not be resolved");
            }
            Err(issues)
        }
    }
}

pub fn execute(plan: &Plan, seed: u64, out: &mut Artifacts) -> entroq::Result<Outcome> {
    match plan {
        Plan::FluctCovariance(p) => sampling::run_covariance(p, seed, out),
        Plan::EntropyLimit(p) => sampling::run_limit(p, seed, out),
        Plan::Gibbs(p) => gibbs::run(p, out),
        Plan::MadelungEquivalence(p) => madelung::run(p, out),
        Plan::WdwOrdering(p) => wdw::run_ordering(p, out),
        Plan::WdwSolve(p) => wdw::run_solve(p, out),
        Plan::Emergent(p) => emergent::run(p, out),
        Plan::Suppression(p) => emergent::run_suppression(p, out),
    }
}

/// Seventeen significant digits.
pub(crate) fn num(x: f64) -> String {
    format!("{x:.16e}")
}
