use std::io::Write;

use entroq::entropy::{fisher_functional, kl_mc, small_dt_limit_report, tsallis_mc};
use entroq::fluctuation::{
    build_fluctuation_kernel, build_gravity_kernel, covariance_check, sample, FluctuationKernel, Sector,
};
use entroq::ConfigSpace;

use super::num;
use crate::config::{ExperimentConfig, Issues, SpaceDefaults};
use crate::manifest::{Artifacts, Check, Outcome};

const SCALAR_COV_TOL: f64 = 0.01;
const GRAVITY_COV_TOL: f64 = 0.03;
const INVERSE_TOL: f64 = 1e-10;
const SLOPE_TOL: f64 = 0.02;
const TSALLIS_TOL: f64 = 0.03;

pub struct CovariancePlan {
    kernel: FluctuationKernel,
    samples: usize,
}

pub fn covariance(cfg: &ExperimentConfig, issues: &mut Issues) -> Option<CovariancePlan> {
    let n = &cfg.numerics;
    let dt = issues.required("numerics.dt", &n.dt).map(|v| issues.positive("numerics.dt", Some(v), 1.0));
    let samples = issues
        .required("numerics.samples", &n.samples)
        .map(|v| issues.count("numerics.samples", Some(v), 1, 2));
    let kind = cfg.kind(&["scalar-lattice", "gravity"]).map_err(|i| issues.0.push(i)).ok()?;
    let defaults = SpaceDefaults::default();
    let constants = cfg.constants(issues, &defaults);
    if !issues.is_empty() {
        return None;
    }
    let kernel = if kind == "gravity" {
        let h = cfg.metric(issues)?;
        build_gravity_kernel(&h, dt?, constants)
    } else {
        let space = cfg.scalar_space(issues, &defaults, constants)?;
        build_fluctuation_kernel(&space, dt?, constants)
    };
    let kernel = kernel.map_err(|e| issues.push("space", e.to_string())).ok()?;
    Some(CovariancePlan {
        kernel,
        samples: samples?,
    })
}

pub fn run_covariance(p: &CovariancePlan, seed: u64, out: &mut Artifacts) -> entroq::Result<Outcome> {
    let batch = sample(&p.kernel, p.samples, seed)?;
    let report = covariance_check(&batch)?;
    let mut f = out.file("samples.csv")?;
    batch.write_csv(&mut f)?;
    f.flush()?;
    let mut f = out.file("covariance.csv")?;
    writeln!(f, "i,j,estimated,theoretical,stderr")?;
    let d = batch.dim;
    for i in 0..d {
        for j in 0..d {
            writeln!(
                f,
                "{i},{j},{},{},{}",
                num(report.estimated_cov[i][j]),
                num(report.theoretical_cov[i][j]),
                num(report.stderr[i][j])
            )?;
        }
    }
    f.flush()?;
    let tol = match p.kernel.sector() {
        Sector::GravityTraceless => GRAVITY_COV_TOL,
        _ => SCALAR_COV_TOL,
    };
    let mut o = Outcome::default();
    o.check(Check::at_most("covariance_max_rel_err", report.max_rel_err, tol));
    if let Some(r) = p.kernel.inverse_residual() {
        o.check(Check::at_most("kernel_inverse_residual", r, INVERSE_TOL));
    }
    o.measure("max_z", report.max_z);
    o.measure("variance_0", report.estimated_cov[0][0]);
    Ok(o)
}

pub struct LimitPlan {
    space: ConfigSpace,
    rho: Vec<f64>,
    kernels: Vec<FluctuationKernel>,
    alphas: Vec<f64>,
    samples: usize,
}

pub fn limit(cfg: &ExperimentConfig, issues: &mut Issues) -> Option<LimitPlan> {
    let n = &cfg.numerics;
    let samples = issues.required("numerics.samples", &n.samples);
    if let Some(s) = samples {
        issues.count("numerics.samples", Some(s), 1, 2);
    }
    let dts = issues.required("sweeps.dts", &cfg.sweeps.dts);
    let dts = issues.positive_list("sweeps.dts", &dts, &[]);
    let alphas = issues.positive_list("sweeps.alphas", &cfg.sweeps.alphas, &[0.5, 2.0]);
    if alphas.contains(&1.0) {
        issues.push("sweeps.alphas", "order 1 is the KL divergence itself");
    }
    let width = issues.positive("numerics.width", n.width, 1.0);
    cfg.kind(&["scalar-lattice"]).map_err(|i| issues.0.push(i)).ok()?;
    if cfg.space.sites.unwrap_or(1) != 1 {
        issues.push("space.sites", "the limit experiment uses a single site");
    }
    let defaults = SpaceDefaults {
        field: (-14.0 * width, 14.0 * width, 561),
        ..SpaceDefaults::default()
    };
    let constants = cfg.constants(issues, &defaults);
    let space = cfg.scalar_space(issues, &defaults, constants)?;
    let grid = space.grid();
    let mut rho: Vec<f64> = grid
        .axis(0)
        .coords()
        .iter()
        .map(|x| (-x * x / (2.0 * width * width)).exp())
        .collect();
    let z = grid.integrate(&rho);
    rho.iter_mut().for_each(|r| *r /= z);
    let kernels = dts
        .iter()
        .map(|&dt| build_fluctuation_kernel(&space, dt, constants))
        .collect::<entroq::Result<Vec<_>>>()
        .map_err(|e| issues.push("sweeps.dts", e.to_string()))
        .ok()?;
    Some(LimitPlan {
        space,
        rho,
        kernels,
        alphas,
        samples: samples?,
    })
}

pub fn run_limit(p: &LimitPlan, seed: u64, out: &mut Artifacts) -> entroq::Result<Outcome> {
    let grid = p.space.grid();
    let report = small_dt_limit_report(&p.rho, &p.space, &p.kernels, p.samples, seed)?;
    let fisher = fisher_functional(&p.rho, &p.space)?;

    let mut f = out.file("density.csv")?;
    writeln!(f, "phi,rho")?;
    for (x, r) in grid.axis(0).coords().iter().zip(&p.rho) {
        writeln!(f, "{},{}", num(*x), num(*r))?;
    }
    f.flush()?;
    let mut f = out.file("limit.csv")?;
    writeln!(f, "dt,kl,stderr,samples")?;
    for (dt, e) in report.dts.iter().zip(&report.estimates) {
        writeln!(f, "{},{},{},{}", num(*dt), num(e.value), num(e.stderr), e.n_samples)?;
    }
    f.flush()?;

    // Orders are compared on the median step with a shared sample stream.
    let mut order: Vec<usize> = (0..p.kernels.len()).collect();
    order.sort_by(|&a, &b| p.kernels[a].dt().total_cmp(&p.kernels[b].dt()));
    let kernel = &p.kernels[order[order.len() / 2]];
    let tseed = seed.wrapping_add(1);
    let kl = kl_mc(grid, &p.rho, kernel, p.samples, tseed)?;
    let mut o = Outcome::default();
    o.check(Check::rel_within("kl_slope", report.slope, report.fisher_prediction, SLOPE_TOL));
    let mut f = out.file("tsallis.csv")?;
    writeln!(f, "alpha,dt,tsallis,stderr,kl,ratio")?;
    for &alpha in &p.alphas {
        let ts = tsallis_mc(grid, &p.rho, alpha, kernel, p.samples, tseed)?;
        let ratio = ts.value / kl.value;
        writeln!(f, "{},{},{},{},{},{}", num(alpha), num(kernel.dt()), num(ts.value), num(ts.stderr), num(kl.value), num(ratio))?;
        o.check(Check::rel_within(&format!("tsallis_ratio_alpha_{alpha}"), ratio, alpha, TSALLIS_TOL));
    }
    f.flush()?;
    o.measure("fisher", fisher);
    o.measure("intercept", report.intercept);
    o.measure("fit_residual", report.fit_residual);
    Ok(o)
}
