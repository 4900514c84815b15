use std::io::Write;

use entroq::emergent::{
    evolve_emergent, solve_background, suppression_scan, BackgroundOptions, BackgroundTrajectory, Direction,
    EmergentOptions, EmergentRun,
};
use entroq::madelung::{evolve_schrodinger, WaveState};
use entroq::{ConfigSpace, Grid, PhysicalConstants, SpaceKind};
use num_complex::Complex64;

use super::num;
use crate::config::{ExperimentConfig, Issues, SpaceDefaults};
use crate::manifest::{Artifacts, Check, Outcome};

const NORM_DRIFT_TOL: f64 = 1e-6;
const LINEAR_STEP_TOL: f64 = 1e-8;
const SLOPE_TOL: f64 = 0.05;

pub struct EmergentPlan {
    space: ConfigSpace,
    constants: PhysicalConstants,
    background: BackgroundOptions,
    packet: WaveState,
    dt: f64,
    steps: usize,
    options: EmergentOptions,
}

fn setup(cfg: &ExperimentConfig, issues: &mut Issues, grav: f64, steps_default: Option<usize>) -> Option<EmergentPlan> {
    let n = &cfg.numerics;
    cfg.kind(&["coupled"]).map_err(|i| issues.0.push(i)).ok()?;
    let dt = issues.required("numerics.dt", &n.dt).map(|v| issues.positive("numerics.dt", Some(v), 1.0));
    let steps = match steps_default {
        Some(d) => Some(issues.count("numerics.steps", n.steps, d, 1)),
        None => issues.required("numerics.steps", &n.steps).map(|v| issues.count("numerics.steps", Some(v), 1, 1)),
    };
    let direction = match n.direction.as_deref().unwrap_or("expanding") {
        "expanding" => Direction::Expanding,
        "contracting" => Direction::Contracting,
        other => {
            issues.push("numerics.direction", format!("`{other}` is not `expanding` or `contracting`"));
            Direction::Expanding
        }
    };
    let (dt, steps) = (dt?, steps?);
    let background = BackgroundOptions {
        a0: issues.positive("numerics.a0", n.a0, 1.0),
        direction,
        matter_momentum: issues.finite("numerics.matter_momentum", n.matter_momentum, 1.0),
        t_max: issues.positive("numerics.t_max", n.t_max, dt * (steps + 1) as f64),
        rtol: 1e-12,
    };
    let options = EmergentOptions {
        corrections_on: n.corrections.unwrap_or(true),
        record_every: issues.count("numerics.record_every", n.record_every, 1, 1),
    };
    let center = issues.finite("numerics.center", n.center, -1.0);
    let width = issues.positive("numerics.width", n.width, 1.0);
    let momentum = issues.finite("numerics.momentum", n.momentum, 1.5);
    let defaults = SpaceDefaults {
        curvature: -1,
        a: (0.5, 4.0, 101),
        grav,
        ..SpaceDefaults::default()
    };
    let constants = cfg.constants(issues, &defaults);
    let space = cfg.coupled_space(issues, &defaults, constants)?;
    let phi = Grid::new(vec![space.grid().axis(1).clone()]).ok()?;
    let psi = phi
        .axis(0)
        .coords()
        .iter()
        .map(|p| Complex64::from_polar((-((p - center) / width).powi(2)).exp(), momentum * p))
        .collect();
    let packet = WaveState::new(psi, 0.0)
        .normalized(&phi)
        .map_err(|e| issues.push("numerics.width", e.to_string()))
        .ok()?;
    Some(EmergentPlan {
        space,
        constants,
        background,
        packet,
        dt,
        steps,
        options,
    })
}

pub fn plan(cfg: &ExperimentConfig, issues: &mut Issues) -> Option<EmergentPlan> {
    setup(cfg, issues, 1e-3, None)
}

fn evolve(p: &EmergentPlan) -> entroq::Result<(EmergentRun, BackgroundTrajectory)> {
    let bg = solve_background(&p.space, &p.constants, &p.background)?;
    let start = EmergentRun::new(&p.space, p.packet.clone(), bg.a[0], p.options)?;
    let run = evolve_emergent(&start, &bg, &p.space, &p.constants, p.dt, p.steps)?;
    Ok((run, bg))
}

fn write_common(run: &EmergentRun, bg: &BackgroundTrajectory, out: &mut Artifacts) -> entroq::Result<()> {
    let mut f = out.file("steps.csv")?;
    run.write_csv(&mut f)?;
    f.flush()?;
    let mut f = out.file("background.csv")?;
    writeln!(f, "t,a,adot")?;
    for i in 0..bg.times.len() {
        writeln!(f, "{},{},{}", num(bg.times[i]), num(bg.a[i]), num(bg.adot[i]))?;
    }
    f.flush()?;
    let mut f = out.file("final_state.csv")?;
    let last = run.current();
    WaveState::new(last.psi.clone(), last.t).write_csv(&run.phi, &mut f)?;
    f.flush()?;
    Ok(())
}

fn norm_drift(run: &EmergentRun) -> f64 {
    run.records.windows(2).map(|w| (w[1].norm - w[0].norm).abs()).fold(0.0, f64::max)
}

/// Largest deviation of each recorded step from an independent frozen
/// coefficient step at the midpoint scale factor.
fn linear_step_deviation(p: &EmergentPlan, run: &EmergentRun, bg: &BackgroundTrajectory) -> entroq::Result<f64> {
    let volume = p.space.fiducial_volume().unwrap_or(1.0);
    let mut worst: f64 = 0.0;
    for k in 1..run.states.len() {
        let before = &run.states[k - 1];
        let (a_mid, _) = bg.at(before.time + 0.5 * p.dt)?;
        let sector = ConfigSpace::uniform(
            SpaceKind::ScalarLattice,
            run.phi.clone(),
            vec![1.0 / (volume * a_mid.powi(3))],
            vec![0.0; run.phi.len()],
            p.constants,
        )?;
        let step = evolve_schrodinger(before, &sector, p.dt, 1, 1)?;
        worst = worst.max(step.last().distance(&run.states[k], &run.phi));
    }
    Ok(worst)
}

pub fn run(p: &EmergentPlan, out: &mut Artifacts) -> entroq::Result<Outcome> {
    let (run, bg) = evolve(p)?;
    write_common(&run, &bg, out)?;
    let mut o = Outcome::default();
    o.check(Check::at_most("norm_drift", norm_drift(&run), NORM_DRIFT_TOL));
    if !p.options.corrections_on && p.options.record_every == 1 {
        o.check(Check::at_most("linear_step_deviation", linear_step_deviation(p, &run, &bg)?, LINEAR_STEP_TOL));
    }
    let peak = run.records.iter().map(|r| r.gamma_cl_max + r.gamma_q_max).fold(0.0, f64::max);
    o.measure("gamma_max", peak);
    o.measure("t_end", run.current().t);
    if let Some(reason) = &bg.truncation {
        o.measure("background_truncated_at", bg.t_end());
        eprintln!("background truncated: {reason}");
    }
    Ok(o)
}

pub struct SuppressionPlan {
    base: EmergentPlan,
    grav: Vec<f64>,
    hbar: Vec<f64>,
}

pub fn suppression(cfg: &ExperimentConfig, issues: &mut Issues) -> Option<SuppressionPlan> {
    let grav = cfg.sweeps.grav.clone().unwrap_or_else(|| vec![0.0, 1e-4, 1e-3, 1e-2]);
    if grav.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
        issues.push("sweeps.grav", "entries must be non-negative");
    }
    let hbar = issues.positive_list("sweeps.hbar", &cfg.sweeps.hbar, &[0.25, 0.5, 1.0, 2.5]);
    if cfg.numerics.corrections == Some(false) {
        issues.push("numerics.corrections", "the scan needs the corrections switched on");
    }
    let base = setup(cfg, issues, 1e-5, Some(50))?;
    Some(SuppressionPlan { base, grav, hbar })
}

pub fn run_suppression(p: &SuppressionPlan, out: &mut Artifacts) -> entroq::Result<Outcome> {
    let (run, bg) = evolve(&p.base)?;
    write_common(&run, &bg, out)?;
    let rep = suppression_scan(&run, &bg, &p.base.space, &p.base.constants, &p.grav, &p.hbar)?;
    let mut f = out.file("suppression.csv")?;
    writeln!(f, "parameter,value,ratio")?;
    for (g, r) in &rep.grav_rows {
        writeln!(f, "grav,{},{}", num(*g), num(*r))?;
    }
    for (h, r) in &rep.hbar_rows {
        writeln!(f, "hbar,{},{}", num(*h), num(*r))?;
    }
    f.flush()?;
    let mut o = Outcome::default();
    o.check(Check::abs_within("grav_slope", rep.grav_slope, 1.0, SLOPE_TOL));
    o.check(Check::abs_within("hbar_slope", rep.hbar_slope, 2.0, SLOPE_TOL));
    o.check(Check::at_most("norm_drift", norm_drift(&run), NORM_DRIFT_TOL));
    Ok(o)
}
