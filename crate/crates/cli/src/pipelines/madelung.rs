use std::io::Write;

use entroq::madelung::{
    ensemble_from_wave, evolve_madelung, evolve_schrodinger, wave_from_ensemble, EnsembleState, MadelungOptions,
};
use entroq::ConfigSpace;

use super::num;
use crate::config::{ExperimentConfig, Issues, SpaceDefaults};
use crate::manifest::{Artifacts, Check, Outcome};

const DISCREPANCY_TOL: f64 = 1e-3;
const REFINEMENT_RATIO: f64 = 3.5;
const DRIFT_TOL: f64 = 1e-10;

/// A packet evolved on a grid and on its refinement (spacing and step halved).
pub struct EquivalencePlan {
    levels: [(ConfigSpace, f64, usize); 2],
    center: f64,
    width: f64,
    momentum: f64,
}

pub fn plan(cfg: &ExperimentConfig, issues: &mut Issues) -> Option<EquivalencePlan> {
    let n = &cfg.numerics;
    cfg.kind(&["scalar-lattice"]).map_err(|i| issues.0.push(i)).ok()?;
    if cfg.space.sites.unwrap_or(1) != 1 {
        issues.push("space.sites", "the equivalence experiment uses a single site");
    }
    let dt = issues.positive("numerics.dt", n.dt, 2.5e-4);
    let steps = issues.count("numerics.steps", n.steps, 4000, 1);
    let center = issues.finite("numerics.center", n.center, 0.5);
    let width = issues.positive("numerics.width", n.width, 1.0);
    let momentum = issues.finite("numerics.momentum", n.momentum, 0.0);
    let defaults = SpaceDefaults {
        field: (-7.0, 7.0, 512),
        ..SpaceDefaults::default()
    };
    let constants = cfg.constants(issues, &defaults);
    let coarse = cfg.scalar_space(issues, &defaults, constants)?;
    let axis = coarse.grid().axis(0);
    let fine_defaults = SpaceDefaults {
        field: (axis.min, axis.max, 2 * axis.points - 1),
        ..defaults
    };
    let mut fine_cfg = cfg.clone();
    fine_cfg.space.field_points = None;
    let fine = fine_cfg.scalar_space(issues, &fine_defaults, constants)?;
    Some(EquivalencePlan {
        levels: [(coarse, dt, steps), (fine, 0.5 * dt, 2 * steps)],
        center,
        width,
        momentum,
    })
}

fn packet(p: &EquivalencePlan, space: &ConfigSpace) -> EnsembleState {
    let grid = space.grid();
    let x = grid.axis(0).coords();
    let n = x.len();
    let mut rho: Vec<f64> = x.iter().map(|q| (-((q - p.center) / p.width).powi(2)).exp()).collect();
    rho[0] = 0.0;
    rho[n - 1] = 0.0;
    let m = grid.integrate(&rho);
    rho.iter_mut().for_each(|r| *r /= m);
    let s = x.iter().map(|q| p.momentum * q).collect();
    EnsembleState::new(rho, s, 0.0)
}

pub fn run(p: &EquivalencePlan, out: &mut Artifacts) -> entroq::Result<Outcome> {
    let mut rows = Vec::new();
    for (level, (space, dt, steps)) in p.levels.iter().enumerate() {
        let c = space.constants();
        let grid = space.grid();
        let start = packet(p, space);
        let opts = MadelungOptions {
            quantum: true,
            record_every: *steps,
        };
        let mad = evolve_madelung(&start, space, *dt, *steps, opts)?;
        let sch = evolve_schrodinger(&wave_from_ensemble(&start, c), space, *dt, *steps, *steps)?;
        let distance = wave_from_ensemble(mad.last(), c).distance(sch.last(), grid);
        let tag = if level == 0 { "coarse" } else { "fine" };
        let mut f = out.file(&format!("{tag}_madelung.csv"))?;
        mad.last().write_csv(grid, c, &mut f)?;
        f.flush()?;
        let mut f = out.file(&format!("{tag}_schrodinger.csv"))?;
        ensemble_from_wave(sch.last(), grid, c, 0)?.state.write_csv(grid, c, &mut f)?;
        f.flush()?;
        rows.push((grid.len(), *dt, distance, sch.max_norm_drift));
    }
    let mut f = out.file("summary.csv")?;
    writeln!(f, "points,dt,discrepancy,max_norm_drift")?;
    for (n, dt, d, drift) in &rows {
        writeln!(f, "{n},{},{},{}", num(*dt), num(*d), num(*drift))?;
    }
    f.flush()?;
    let mut o = Outcome::default();
    o.check(Check::at_most("discrepancy", rows[0].2, DISCREPANCY_TOL));
    o.check(Check::at_least("refinement_ratio", rows[0].2 / rows[1].2, REFINEMENT_RATIO));
    o.check(Check::at_most("norm_drift_per_step", rows[0].3, DRIFT_TOL));
    Ok(o)
}
