//! Entropy-regularized minimization on the probability simplex, the
//! discretized total action of a density/phase trajectory with its exact
//! gradient, and residual checks of the stationarity system and of the
//! ensemble constraints.
//!
//! All spatial derivatives use the grid's first-derivative matrix `D`
//! (central in the interior, one-sided second order at boundaries), so the
//! gradient of the assembled action is exact at the discrete level.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::configspace::ConfigSpace;
use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;
use crate::madelung::{bohm_potential, EnsembleState};

/// Minimizer of `Σ p E + (ħ/2) Σ p ln(p/σ)` over the simplex.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GibbsSolution {
    pub p: Vec<f64>,
    /// `max_i |g_i − Σ_j p_j g_j|` with `g` the objective gradient.
    pub kkt_residual: f64,
    pub iterations: usize,
    /// `(iteration, kkt residual)` after every accepted step.
    pub trace: Vec<(usize, f64)>,
}

impl GibbsSolution {
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iteration,kkt_residual")?;
        for (i, r) in &self.trace {
            writeln!(out, "{i},{r:.16e}")?;
        }
        Ok(())
    }
}

fn normalize_log(logp: &mut [f64]) {
    let m = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: Vec<f64> = logp.iter().map(|l| (l - m).exp()).collect();
    let lz = m + pairwise_sum(&z).ln();
    logp.iter_mut().for_each(|l| *l -= lz);
}

fn gibbs_objective(logp: &[f64], energy: &[f64], log_prior: &[f64], half_hbar: f64) -> f64 {
    let terms: Vec<f64> = (0..logp.len())
        .map(|i| logp[i].exp() * (energy[i] + half_hbar * (logp[i] - log_prior[i])))
        .collect();
    pairwise_sum(&terms)
}

/// Mirror descent in the log domain with backtracking on the step size.
/// The iteration never evaluates the closed-form minimizer; it contracts
/// towards it geometrically.
pub fn gibbs_minimize(energy: &[f64], hbar: f64, prior: &[f64], tol: f64, max_iter: usize) -> Result<GibbsSolution> {
    let n = energy.len();
    if n == 0 {
        return Err(Error::param("energy", "must be nonempty"));
    }
    if prior.len() != n {
        return Err(Error::ShapeMismatch { expected: n, got: prior.len() });
    }
    if energy.iter().any(|e| !e.is_finite()) {
        return Err(Error::param("energy", "values must be finite"));
    }
    if prior.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::param("prior", "values must be positive"));
    }
    if !(hbar > 0.0) {
        return Err(Error::param("hbar", "must be positive"));
    }
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let half = 0.5 * hbar;
    let log_prior: Vec<f64> = prior.iter().map(|s| s.ln()).collect();
    let mut logp = vec![-(n as f64).ln(); n];
    let mut eta = 0.5 / hbar;
    let eta_max = 1.5 / hbar;
    let mut trace = Vec::new();
    let mut value = gibbs_objective(&logp, energy, &log_prior, half);
    let kkt = |logp: &[f64]| -> (Vec<f64>, f64) {
        let g: Vec<f64> = (0..n).map(|i| energy[i] + half * (logp[i] - log_prior[i] + 1.0)).collect();
        let pg: Vec<f64> = (0..n).map(|i| logp[i].exp() * g[i]).collect();
        let mean = pairwise_sum(&pg);
        let r = g.iter().map(|gi| (gi - mean).abs()).fold(0.0, f64::max);
        (g, r)
    };
    let mut last = f64::INFINITY;
    for it in 0..max_iter {
        let (g, r) = kkt(&logp);
        last = r;
        if r <= tol {
            return Ok(GibbsSolution {
                p: logp.iter().map(|l| l.exp()).collect(),
                kkt_residual: r,
                iterations: it,
                trace,
            });
        }
        loop {
            let mut trial: Vec<f64> = (0..n).map(|i| logp[i] - eta * g[i]).collect();
            normalize_log(&mut trial);
            let v = gibbs_objective(&trial, energy, &log_prior, half);
            // Slack of a few ulps so rounding near the optimum cannot stall.
            if v <= value + 1e-14 * (value.abs() + 1.0) || eta < 1e-12 / hbar {
                logp = trial;
                value = v;
                eta = (eta * 1.5).min(eta_max);
                break;
            }
            eta *= 0.5;
        }
        trace.push((it + 1, kkt(&logp).1));
    }
    Err(Error::NoConvergence {
        method: "entropic mirror descent",
        iterations: max_iter,
        residual: last,
    })
}

fn check_trajectory(trajectory: &[EnsembleState], space: &ConfigSpace) -> Result<()> {
    if trajectory.len() < 2 {
        return Err(Error::param("trajectory", "needs at least two snapshots"));
    }
    for st in trajectory {
        if st.rho.len() != space.len() || st.s.len() != space.len() {
            return Err(Error::ShapeMismatch {
                expected: space.len(),
                got: st.rho.len().min(st.s.len()),
            });
        }
    }
    Ok(())
}

/// `D x` along `axis`.
fn grad(space: &ConfigSpace, x: &[f64], axis: usize) -> Vec<f64> {
    space.grid().derivative(x, axis)
}

/// Ensemble energy `∫ρ(½ Σ K (DS)² + U) + (α ħ²/8) ∫ Σ K (Dρ)²/ρ`, the
/// classical Hamiltonian expectation plus the Fisher correction.
fn ensemble_energy(rho: &[f64], s: &[f64], space: &ConfigSpace) -> f64 {
    let grid = space.grid();
    let k2 = space.constants().effective_hbar().powi(2);
    let u = space.potential();
    let mut terms: Vec<f64> = rho.iter().zip(u).map(|(r, u)| r * u).collect();
    for axis in 0..grid.dim() {
        let ds = grad(space, s, axis);
        let dr = grad(space, rho, axis);
        for f in 0..grid.len() {
            let k = space.kinetic(f, axis);
            terms[f] += 0.5 * rho[f] * k * ds[f] * ds[f];
            if rho[f] > 0.0 {
                terms[f] += 0.125 * k2 * k * dr[f] * dr[f] / rho[f];
            }
        }
    }
    pairwise_sum(&terms) * grid.cell_volume()
}

/// Discretized total action of a trajectory of snapshots spaced by `dt`:
///
/// ```text
/// A = Σ_k [ ∫ρ_k (S_{k+1} − S_k) + dt · N · E(ρ_k, S_k) ]
/// ```
///
/// where `E` is the ensemble energy including the Fisher term with
/// coefficient `α ħ²/8`. The last snapshot only enters through its phase.
pub fn total_action(trajectory: &[EnsembleState], space: &ConfigSpace, dt: f64) -> Result<f64> {
    check_trajectory(trajectory, space)?;
    if !(dt > 0.0) {
        return Err(Error::param("dt", "must be positive"));
    }
    let vol = space.grid().cell_volume();
    let lapse = space.constants().lapse;
    let mut parts = Vec::with_capacity(trajectory.len());
    for w in trajectory.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let kinetic: Vec<f64> = (0..a.rho.len()).map(|f| a.rho[f] * (b.s[f] - a.s[f])).collect();
        parts.push(pairwise_sum(&kinetic) * vol + dt * lapse * ensemble_energy(&a.rho, &a.s, space));
    }
    Ok(pairwise_sum(&parts))
}

/// Partial derivatives of [`total_action`] with respect to every nodal
/// density and phase value, snapshot by snapshot.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ActionVariation {
    pub d_rho: Vec<Vec<f64>>,
    pub d_s: Vec<Vec<f64>>,
}

/// Exact gradient of [`total_action`]. Setting it to zero gives the
/// discrete continuity equation (phase variations) and the discrete
/// quantum Hamilton–Jacobi equation (density variations).
pub fn action_variation(trajectory: &[EnsembleState], space: &ConfigSpace, dt: f64) -> Result<ActionVariation> {
    check_trajectory(trajectory, space)?;
    let grid = space.grid();
    let n = grid.len();
    let vol = grid.cell_volume();
    let c = space.constants();
    let k2 = c.effective_hbar().powi(2);
    let lapse = c.lapse;
    let u = space.potential();
    let last = trajectory.len() - 1;
    let mut d_rho = vec![vec![0.0; n]; trajectory.len()];
    let mut d_s = vec![vec![0.0; n]; trajectory.len()];
    for (k, st) in trajectory.iter().enumerate() {
        if k >= 1 {
            for f in 0..n {
                d_s[k][f] += vol * trajectory[k - 1].rho[f];
            }
        }
        if k == last {
            continue;
        }
        let next = &trajectory[k + 1];
        let w = dt * lapse * vol;
        for f in 0..n {
            d_s[k][f] -= vol * st.rho[f];
            d_rho[k][f] += vol * (next.s[f] - st.s[f]) + w * u[f];
        }
        for axis in 0..grid.dim() {
            let kin = space.kinetic_along(axis);
            let ds = grad(space, &st.s, axis);
            let dr = grad(space, &st.rho, axis);
            let flux: Vec<f64> = (0..n).map(|f| st.rho[f] * kin[f] * ds[f]).collect();
            let ratio: Vec<f64> = (0..n)
                .map(|f| if st.rho[f] > 0.0 { kin[f] * dr[f] / st.rho[f] } else { 0.0 })
                .collect();
            let back_flux = grid.derivative_transpose(&flux, axis);
            let back_ratio = grid.derivative_transpose(&ratio, axis);
            for f in 0..n {
                d_s[k][f] += w * back_flux[f];
                let mut g = 0.5 * kin[f] * ds[f] * ds[f];
                if st.rho[f] > 0.0 {
                    g += 0.125 * k2 * (2.0 * back_ratio[f] - kin[f] * dr[f] * dr[f] / (st.rho[f] * st.rho[f]));
                }
                d_rho[k][f] += w * g;
            }
        }
    }
    Ok(ActionVariation { d_rho, d_s })
}

/// Lagrange multipliers of the constrained ensemble action.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSet {
    /// Multiplier of the `∂S/∂t` constraint.
    pub lam1: f64,
    /// Multiplier of the phase momentum constraint; twice the shift.
    pub lam2: [f64; 3],
    /// Multiplier of the `∂ρ/∂t` constraint.
    pub lam3: f64,
    /// Multiplier of the density momentum constraint, `√h` times a free
    /// constant; stored as that constant.
    pub lam4: [f64; 3],
}

impl Default for MultiplierSet {
    fn default() -> Self {
        MultiplierSet::canonical(0.0, 0.0)
    }
}

impl MultiplierSet {
    /// `λ2 = 2·shift`, `λ4 = M`, others zero.
    pub fn canonical(shift: f64, m: f64) -> Self {
        MultiplierSet {
            lam1: 0.0,
            lam2: [2.0 * shift; 3],
            lam3: 0.0,
            lam4: [m; 3],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub residual_norm: f64,
    pub grid_points: usize,
}

/// Named residual norms.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub entries: BTreeMap<String, ResidualEntry>,
}

impl ResidualReport {
    pub fn insert(&mut self, name: &str, residual_norm: f64, grid_points: usize) {
        self.entries.insert(
            name.to_string(),
            ResidualEntry {
                residual_norm,
                grid_points,
            },
        );
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.get(name).map(|e| e.residual_norm)
    }

    pub fn merge(&mut self, other: ResidualReport) {
        self.entries.extend(other.entries);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn rms_interior(values: &[f64], space: &ConfigSpace) -> (f64, usize) {
    let nodes = space.grid().interior_nodes();
    if nodes.is_empty() {
        return (0.0, 0);
    }
    let sq: Vec<f64> = nodes.iter().map(|&f| values[f] * values[f]).collect();
    ((pairwise_sum(&sq) / nodes.len() as f64).sqrt(), nodes.len())
}

/// Divergence of the probability current `Σ_A ∂_A(ρ K_A ∂_A S)`.
pub(crate) fn current_divergence(rho: &[f64], s: &[f64], space: &ConfigSpace) -> Vec<f64> {
    let grid = space.grid();
    let mut out = vec![0.0; grid.len()];
    for axis in 0..grid.dim() {
        let coeff: Vec<f64> = (0..grid.len()).map(|f| rho[f] * space.kinetic(f, axis)).collect();
        let d = grid.divergence_expanded(&coeff, s, axis);
        out.iter_mut().zip(d).for_each(|(o, v)| *o += v);
    }
    out
}

/// Quantum Hamilton–Jacobi density `½ Σ K (∂S)² + U + Q`.
pub(crate) fn quantum_hj(rho: &[f64], s: &[f64], space: &ConfigSpace) -> Vec<f64> {
    let grid = space.grid();
    let q = bohm_potential(rho, space);
    let mut out: Vec<f64> = space.potential().iter().zip(&q).map(|(u, q)| u + q).collect();
    for axis in 0..grid.dim() {
        let d = grid.derivative(s, axis);
        for f in 0..grid.len() {
            out[f] += 0.5 * space.kinetic(f, axis) * d[f] * d[f];
        }
    }
    out
}

fn snapshot_pair<'a>(
    before: &'a EnsembleState,
    after: &'a EnsembleState,
    space: &ConfigSpace,
) -> Result<(f64, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    check_trajectory(&[before.clone(), after.clone()], space)?;
    let dt = after.time - before.time;
    if !(dt > 0.0) {
        return Err(Error::param("snapshots", "times must increase"));
    }
    let n = space.len();
    let rho: Vec<f64> = (0..n).map(|f| 0.5 * (before.rho[f] + after.rho[f])).collect();
    let s: Vec<f64> = (0..n).map(|f| 0.5 * (before.s[f] + after.s[f])).collect();
    let st: Vec<f64> = (0..n).map(|f| (after.s[f] - before.s[f]) / dt).collect();
    let rt: Vec<f64> = (0..n).map(|f| (after.rho[f] - before.rho[f]) / dt).collect();
    Ok((dt, rho, s, st, rt))
}

/// Residuals of the stationarity system evaluated on two snapshots:
/// time derivatives by two-point differences, everything else on the
/// snapshot average. Norms are RMS over interior nodes.
///
/// | name | equation |
/// |---|---|
/// | var1 | `∂S/∂t` |
/// | var2, var4, var5 | momentum constraints (zero for homogeneous data) |
/// | var3 | `∂ρ/∂t` |
/// | var6 | `∫ρℋ + (αħ²/8)∫K(∂ρ)²/ρ` |
/// | var7 | `(1+λ1)∂ρ/∂t + N ∂(ρK∂S)` |
/// | var8 | `(1+λ1)∂S/∂t + N(ℋ + Q)` |
/// | var9, var10 | `N·var11`, `N·var12` |
/// | var11 | `∂(ρK∂S)` |
/// | var12 | `ℋ + Q` |
pub fn stationarity_residuals(
    before: &EnsembleState,
    after: &EnsembleState,
    multipliers: &MultiplierSet,
    space: &ConfigSpace,
) -> Result<ResidualReport> {
    let (_, rho, s, st, rt) = snapshot_pair(before, after, space)?;
    let n = space.len();
    let lapse = space.constants().lapse;
    let div = current_divergence(&rho, &s, space);
    let hj = quantum_hj(&rho, &s, space);
    let mut report = ResidualReport::default();
    let mut put = |name: &str, v: &[f64]| {
        let (r, m) = rms_interior(v, space);
        report.insert(name, r, m);
    };
    put("var1", &st);
    put("var3", &rt);
    let zeros = vec![0.0; n];
    put("var2", &zeros);
    put("var4", &zeros);
    put("var5", &zeros);
    let var7: Vec<f64> = (0..n).map(|f| (1.0 + multipliers.lam1) * rt[f] + lapse * div[f]).collect();
    let var8: Vec<f64> = (0..n).map(|f| (1.0 + multipliers.lam1) * st[f] + lapse * hj[f]).collect();
    put("var7", &var7);
    put("var8", &var8);
    put("var9", &div.iter().map(|v| lapse * v).collect::<Vec<_>>());
    put("var10", &hj.iter().map(|v| lapse * v).collect::<Vec<_>>());
    put("var11", &div);
    put("var12", &hj);
    let e = ensemble_energy(&rho, &s, space);
    report.insert("var6", e.abs(), space.len());
    Ok(report)
}

/// Ensemble constraints on two snapshots: `C1 = ∫ρ ∂S/∂t`,
/// `C3 = ∫ρ ∂ρ/∂t`, and the momentum analogues `C2`, `C4`, which vanish
/// for homogeneous data.
pub fn constraint_residuals(before: &EnsembleState, after: &EnsembleState, space: &ConfigSpace) -> Result<ResidualReport> {
    let (_, rho, _, st, rt) = snapshot_pair(before, after, space)?;
    let grid = space.grid();
    let c1: Vec<f64> = rho.iter().zip(&st).map(|(r, v)| r * v).collect();
    let c3: Vec<f64> = rho.iter().zip(&rt).map(|(r, v)| r * v).collect();
    let mut report = ResidualReport::default();
    report.insert("C1", grid.integrate(&c1).abs(), grid.len());
    report.insert("C2", 0.0, grid.len());
    report.insert("C3", grid.integrate(&c3).abs(), grid.len());
    report.insert("C4", 0.0, grid.len());
    Ok(report)
}

/// Ensemble Hamiltonian `−∫ρℋ` of a quantum ensemble: the classical
/// energy density plus the Fisher correction, with the lapse applied.
pub fn hamiltonian_ensemble(state: &EnsembleState, space: &ConfigSpace) -> Result<f64> {
    state.validate(space.grid())?;
    Ok(-space.constants().lapse * ensemble_energy(&state.rho, &state.s, space))
}
