use std::io::Write;

use entroq::variational::gibbs_minimize;

use super::num;
use crate::config::{ExperimentConfig, Issues};
use crate::manifest::{Artifacts, Check, Outcome};

const SUP_TOL: f64 = 1e-8;

pub struct GibbsPlan {
    energy: Vec<f64>,
    prior: Vec<f64>,
    hbar: f64,
    tol: f64,
    max_iter: usize,
}

pub fn plan(cfg: &ExperimentConfig, issues: &mut Issues) -> Option<GibbsPlan> {
    let n = &cfg.numerics;
    let energy = issues.required("numerics.energy", &n.energy)?;
    if energy.is_empty() || energy.iter().any(|e| !e.is_finite()) {
        issues.push("numerics.energy", "needs at least one finite value");
    }
    let prior = issues.positive_list("numerics.prior", &n.prior, &vec![1.0; energy.len()]);
    if prior.len() != energy.len() {
        issues.push("numerics.prior", format!("has {} entries for {} energies", prior.len(), energy.len()));
    }
    Some(GibbsPlan {
        hbar: issues.positive("space.hbar", cfg.space.hbar, 1.0),
        tol: issues.positive("numerics.tol", n.tol, 1e-13),
        max_iter: issues.count("numerics.max_iter", n.max_iter, 10_000, 1),
        energy,
        prior,
    })
}

pub fn run(p: &GibbsPlan, out: &mut Artifacts) -> entroq::Result<Outcome> {
    let sol = gibbs_minimize(&p.energy, p.hbar, &p.prior, p.tol, p.max_iter)?;
    // Closed form, shifted by the smallest energy to avoid underflow.
    let e_min = p.energy.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = p
        .energy
        .iter()
        .zip(&p.prior)
        .map(|(e, s)| s * (-2.0 * (e - e_min) / p.hbar).exp())
        .collect();
    let z: f64 = weights.iter().sum();
    let oracle: Vec<f64> = weights.iter().map(|w| w / z).collect();
    let sup = sol.p.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let mut f = out.file("gibbs.csv")?;
    writeln!(f, "node,energy,prior,p,closed_form")?;
    for i in 0..p.energy.len() {
        writeln!(f, "{i},{},{},{},{}", num(p.energy[i]), num(p.prior[i]), num(sol.p[i]), num(oracle[i]))?;
    }
    f.flush()?;
    let mut t = out.file("trace.csv")?;
    sol.write_trace_csv(&mut t)?;
    t.flush()?;

    let mut o = Outcome::default();
    o.check(Check::at_most("sup_norm_vs_closed_form", sup, SUP_TOL));
    o.check(Check::at_most("kkt_residual", sol.kkt_residual, p.tol));
    o.measure("iterations", sol.iterations as f64);
    Ok(o)
}
