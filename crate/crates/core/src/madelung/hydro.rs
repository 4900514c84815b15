use serde::{Deserialize, Serialize};

use super::schrodinger::face_kinetic;
use super::EnsembleState;
use crate::configspace::ConfigSpace;
use crate::entropy::DENSITY_FLOOR;
use crate::error::{Error, Result};

/// Largest allowed `2 ħ' N max|K| Δt Σ 1/h²`.
pub const DISPERSIVE_LIMIT: f64 = 2.5;
/// Largest allowed `Δt Σ max|v|/h`.
pub const ADVECTIVE_LIMIT: f64 = 1.0;
const RENORM_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MadelungOptions {
    /// Include the quantum potential; switching it off leaves classical
    /// Hamilton–Jacobi transport.
    pub quantum: bool,
    pub record_every: usize,
}

impl Default for MadelungOptions {
    fn default() -> Self {
        MadelungOptions {
            quantum: true,
            record_every: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MadelungRun {
    pub states: Vec<EnsembleState>,
    /// Renormalization factor applied after every step.
    pub renorm_factors: Vec<f64>,
    pub dispersive_ratio: f64,
    pub max_advective_ratio: f64,
}

impl MadelungRun {
    pub fn last(&self) -> &EnsembleState {
        self.states.last().expect("run holds the initial state")
    }
}

struct Scheme<'a> {
    space: &'a ConfigSpace,
    /// Lapse times face coefficient for the face `(f, f+1)` along each axis.
    faces: Vec<f64>,
    /// Nodal coefficient derivative along each axis, node-major.
    dkin: Vec<f64>,
    quantum: bool,
    /// Boundary nodes with their extrapolation sources, ordered so every
    /// source is filled before it is read.
    edges: Vec<(usize, Vec<(usize, f64)>)>,
}

impl<'a> Scheme<'a> {
    fn new(space: &'a ConfigSpace, quantum: bool) -> Self {
        let grid = space.grid();
        let d = grid.dim();
        let lapse = space.constants().lapse;
        let mut faces = vec![f64::NAN; grid.len() * d];
        let mut dkin = vec![0.0; grid.len() * d];
        for axis in 0..d {
            let der = grid.derivative(&space.kinetic_along(axis), axis);
            for f in 0..grid.len() {
                if grid.neighbor(f, axis, 1).is_some() {
                    faces[f * d + axis] = lapse * face_kinetic(space, f, axis);
                }
                dkin[f * d + axis] = der[f];
            }
        }
        let mut edges: Vec<(usize, usize, Vec<(usize, f64)>)> = Vec::new();
        for f in 0..grid.len() {
            let on: Vec<usize> = (0..d)
                .filter(|&k| {
                    let a = grid.axis(k);
                    let i = grid.index_along(f, k);
                    !a.periodic && (i == 0 || i + 1 == a.points)
                })
                .collect();
            let Some(&axis) = on.first() else { continue };
            let dir: isize = if grid.index_along(f, axis) == 0 { 1 } else { -1 };
            let at = |m: isize| grid.neighbor(f, axis, dir * m).expect("axis has enough points");
            let weights = if grid.axis(axis).points >= 4 {
                vec![(at(1), 3.0), (at(2), -3.0), (at(3), 1.0)]
            } else {
                vec![(at(1), 2.0), (at(2), -1.0)]
            };
            edges.push((on.len(), f, weights));
        }
        edges.sort_by_key(|e| e.0);
        Scheme {
            space,
            faces,
            dkin,
            quantum,
            edges: edges.into_iter().map(|(_, f, w)| (f, w)).collect(),
        }
    }

    /// Largest `Δt Σ_A max|v_A|/h_A` over faces that carry density.
    fn advective_ratio(&self, rho: &[f64], s: &[f64], dt: f64) -> f64 {
        let grid = self.space.grid();
        let d = grid.dim();
        (0..d)
            .map(|axis| {
                let h = grid.axis(axis).spacing();
                let vmax = (0..grid.len())
                    .filter_map(|f| {
                        let p = grid.neighbor(f, axis, 1)?;
                        if rho[f].max(rho[p]) <= DENSITY_FLOOR {
                            return None;
                        }
                        Some((self.faces[f * d + axis] * (s[p] - s[f]) / h).abs())
                    })
                    .fold(0.0, f64::max);
                dt * vmax / h
            })
            .sum()
    }

    fn quantum_potential(&self, rho: &[f64]) -> Vec<f64> {
        let grid = self.space.grid();
        let d = grid.dim();
        let n = grid.len();
        let mut q = vec![0.0; n];
        if !self.quantum {
            return q;
        }
        let k2 = self.space.constants().effective_hbar().powi(2);
        let lapse = self.space.constants().lapse;
        let log: Vec<f64> = rho
            .iter()
            .map(|&r| if r > DENSITY_FLOOR { 0.5 * r.ln() } else { f64::NAN })
            .collect();
        // Missing log-density values next to `f` are extrapolated
        // quadratically from the other side; exact for Gaussian tails.
        let side = |f: usize, axis: usize, dir: isize| -> Option<f64> {
            let at = |m: isize| grid.neighbor(f, axis, dir * m).map(|j| log[j]).filter(|v| !v.is_nan());
            if let Some(v) = grid.neighbor(f, axis, dir).filter(|&j| !grid.on_boundary(j) || rho[j] > DENSITY_FLOOR).map(|j| log[j]).filter(|v| !v.is_nan()) {
                return Some(v);
            }
            Some(3.0 * log[f] - 3.0 * at(-1)? + at(-2)?)
        };
        for f in 0..n {
            if grid.on_boundary(f) || log[f].is_nan() {
                continue;
            }
            let mut acc = 0.0;
            let mut ok = true;
            for axis in 0..d {
                let (Some(lp), Some(lm)) = (side(f, axis, 1), side(f, axis, -1)) else {
                    ok = false;
                    break;
                };
                let h = grid.axis(axis).spacing();
                let d1 = (lp - lm) / (2.0 * h);
                let d2 = (lp - 2.0 * log[f] + lm) / (h * h);
                let k = self.space.kinetic(f, axis);
                acc += k * (d2 + d1 * d1) + self.dkin[f * d + axis] * d1;
            }
            if ok {
                q[f] = -0.5 * k2 * lapse * acc;
            }
        }
        q
    }

    fn rhs(&self, rho: &[f64], s: &[f64], drho: &mut [f64], ds: &mut [f64]) {
        let grid = self.space.grid();
        let d = grid.dim();
        let n = grid.len();
        let lapse = self.space.constants().lapse;
        let u = self.space.potential();
        drho.iter_mut().for_each(|v| *v = 0.0);
        for axis in 0..d {
            let h = grid.axis(axis).spacing();
            for f in 0..n {
                let Some(p) = grid.neighbor(f, axis, 1) else { continue };
                let v = self.faces[f * d + axis] * (s[p] - s[f]) / h;
                let flux = 0.5 * (rho[f] + rho[p]) * v / h;
                drho[f] -= flux;
                drho[p] += flux;
            }
        }
        let q = self.quantum_potential(rho);
        for f in 0..n {
            if grid.on_boundary(f) {
                drho[f] = 0.0;
            }
            let mut kin = 0.0;
            for axis in 0..d {
                let g: f64 = grid.derivative_stencil(f, axis).iter().map(|&(j, w)| w * s[j]).sum();
                kin += 0.5 * self.space.kinetic(f, axis) * g * g;
            }
            ds[f] = -lapse * (kin + u[f]) - q[f];
        }
        for (f, w) in &self.edges {
            ds[*f] = w.iter().map(|&(j, c)| c * ds[j]).sum();
        }
    }
}

/// Fourth-order Runge–Kutta integration of continuity plus quantum
/// Hamilton–Jacobi:
///
/// ```text
/// ∂ρ/∂t = −N Σ_A ∂_A(ρ K_A ∂_A S)
/// ∂S/∂t = −N (½ Σ_A K_A (∂_A S)² + U) − Q
/// ```
///
/// The density flux is centred on cell faces with the kinetic coefficient
/// evaluated at the face, so mass is conserved to rounding; `Q` uses the
/// logarithmic form `R''/R = (ln R)'' + ((ln R)')²`, which stays accurate in
/// Gaussian tails. Density on non-periodic boundaries is clamped to zero
/// and the phase there is extrapolated quadratically from the interior.
pub fn evolve_madelung(
    state: &EnsembleState,
    space: &ConfigSpace,
    dt: f64,
    steps: usize,
    options: MadelungOptions,
) -> Result<MadelungRun> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    let grid = space.grid();
    state.validate(grid)?;
    let scheme = Scheme::new(space, options.quantum);
    let c = space.constants();
    let kmax = (0..grid.dim())
        .flat_map(|a| space.kinetic_along(a))
        .fold(0.0f64, |m, k| m.max(k.abs()));
    let inv_h2: f64 = grid.axes().iter().map(|a| a.spacing().powi(-2)).sum();
    let dispersive = if options.quantum {
        2.0 * c.effective_hbar() * c.lapse * kmax * dt * inv_h2
    } else {
        0.0
    };
    if dispersive > DISPERSIVE_LIMIT {
        return Err(Error::Stability {
            ratio_name: "dispersive ratio 2ħNK·dt/h²",
            value: dispersive,
            limit: DISPERSIVE_LIMIT,
        });
    }

    let n = grid.len();
    let mut rho = state.rho.clone();
    let mut s = state.s.clone();
    for f in 0..n {
        if grid.on_boundary(f) {
            rho[f] = 0.0;
        }
    }
    let record_every = options.record_every.max(1);
    let mut states = vec![EnsembleState::new(rho.clone(), s.clone(), state.time)];
    let mut factors = Vec::with_capacity(steps);
    let mut max_adv: f64 = 0.0;
    let mut k = [(); 4].map(|_| (vec![0.0; n], vec![0.0; n]));
    let mut tr = vec![0.0; n];
    let mut ts = vec![0.0; n];
    for step in 1..=steps {
        let adv = scheme.advective_ratio(&rho, &s, dt);
        max_adv = max_adv.max(adv);
        if adv > ADVECTIVE_LIMIT {
            return Err(Error::Stability {
                ratio_name: "advective ratio v·dt/h",
                value: adv,
                limit: ADVECTIVE_LIMIT,
            });
        }
        for stage in 0..4 {
            let w = match stage {
                0 => 0.0,
                3 => dt,
                _ => 0.5 * dt,
            };
            if stage == 0 {
                tr.copy_from_slice(&rho);
                ts.copy_from_slice(&s);
            } else {
                let (pr, ps) = &k[stage - 1];
                for f in 0..n {
                    tr[f] = rho[f] + w * pr[f];
                    ts[f] = s[f] + w * ps[f];
                }
            }
            let (dr, dsv) = &mut k[stage];
            scheme.rhs(&tr, &ts, dr, dsv);
        }
        for f in 0..n {
            rho[f] += dt / 6.0 * (k[0].0[f] + 2.0 * k[1].0[f] + 2.0 * k[2].0[f] + k[3].0[f]);
            s[f] += dt / 6.0 * (k[0].1[f] + 2.0 * k[1].1[f] + 2.0 * k[2].1[f] + k[3].1[f]);
            if rho[f] < 0.0 {
                rho[f] = 0.0;
            }
        }
        let mass = grid.integrate(&rho);
        let factor = 1.0 / mass;
        if !factor.is_finite() || (factor - 1.0).abs() > RENORM_TOL {
            return Err(Error::Normalization {
                factor,
                tolerance: RENORM_TOL,
                step,
            });
        }
        rho.iter_mut().for_each(|r| *r *= factor);
        factors.push(factor);
        if step % record_every == 0 || step == steps {
            states.push(EnsembleState::new(rho.clone(), s.clone(), state.time + step as f64 * dt));
        }
    }
    Ok(MadelungRun {
        states,
        renorm_factors: factors,
        dispersive_ratio: dispersive,
        max_advective_ratio: max_adv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspace::{build_scalar_lattice_space, LatticeSpec, PhysicalConstants};
    use crate::grid::Axis;
    use std::f64::consts::PI;

    fn line(mass: f64, points: usize, half: f64) -> ConfigSpace {
        build_scalar_lattice_space(
            LatticeSpec { sites: 1, spacing: 1.0 },
            mass,
            &Axis::new("phi", -half, half, points).unwrap(),
            PhysicalConstants::default(),
        )
        .unwrap()
    }

    fn gaussian(x: &[f64], centre: f64, var: f64) -> Vec<f64> {
        x.iter()
            .map(|q| (-(q - centre).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt())
            .collect()
    }

    fn moments(x: &[f64], rho: &[f64], h: f64) -> (f64, f64) {
        let m: f64 = x.iter().zip(rho).map(|(q, r)| q * r).sum::<f64>() * h;
        let v: f64 = x.iter().zip(rho).map(|(q, r)| (q - m).powi(2) * r).sum::<f64>() * h;
        (m, v)
    }

    #[test]
    fn oscillator_ground_pair_is_stationary() {
        let space = line(1.0, 401, 8.0);
        let x = space.grid().axis(0).coords();
        let mut rho = gaussian(&x, 0.0, 0.5);
        rho[0] = 0.0;
        rho[400] = 0.0;
        let mass = space.grid().integrate(&rho);
        rho.iter_mut().for_each(|r| *r /= mass);
        let st = EnsembleState::new(rho.clone(), vec![0.0; 401], 0.0);
        let dt = 1e-3;
        let run = evolve_madelung(&st, &space, dt, 1000, MadelungOptions { quantum: true, record_every: 1000 }).unwrap();
        let end = run.last();
        let drift = rho.iter().zip(&end.rho).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(drift <= 1e-8, "drift {drift}");
        for f in 100..300 {
            assert!((end.s[f] + 0.5 * 1.0).abs() < 1e-6, "S {}", end.s[f]);
        }
        assert!(run.renorm_factors.iter().all(|f| (f - 1.0).abs() < 1e-12));
    }

    #[test]
    fn free_packet_spreads_at_analytic_rate() {
        let space = line(0.0, 801, 8.0);
        let grid = space.grid();
        let x = grid.axis(0).coords();
        let s0 = 1.0f64;
        let rho = gaussian(&x, 0.0, s0 * s0);
        let mass = grid.integrate(&rho);
        let rho: Vec<f64> = rho.iter().map(|r| r / mass).collect();
        let st = EnsembleState::new(rho, vec![0.0; 801], 0.0);
        let run = evolve_madelung(&st, &space, 5e-4, 2000, MadelungOptions { quantum: true, record_every: 2000 }).unwrap();
        let (_, var) = moments(&x, &run.last().rho, grid.axis(0).spacing());
        let exact = s0 * s0 + (1.0 / (2.0 * s0)).powi(2);
        assert!((var - exact).abs() < 1e-3, "var {var} vs {exact}");
    }

    #[test]
    fn classical_transport_follows_characteristics() {
        // Without Q, S = −β q²/2 focuses the ensemble: every characteristic
        // obeys dq/dt = ∂S/∂q along the evolving S.
        let space = line(0.0, 801, 8.0);
        let grid = space.grid();
        let x = grid.axis(0).coords();
        let beta = 0.3;
        let rho = gaussian(&x, 0.5, 0.25);
        let mass = grid.integrate(&rho);
        let rho: Vec<f64> = rho.iter().map(|r| r / mass).collect();
        let s: Vec<f64> = x.iter().map(|q| -beta * q * q / 2.0).collect();
        let st = EnsembleState::new(rho, s, 0.0);
        let t_end = 1.0;
        let steps = 2000;
        let run = evolve_madelung(&st, &space, t_end / steps as f64, steps, MadelungOptions { quantum: false, record_every: steps }).unwrap();
        let (m, v) = moments(&x, &run.last().rho, grid.axis(0).spacing());

        // Characteristic oracle: integrate dq/dt = −β q / (1 − β t) and
        // map the initial mean and spread through the flow.
        let flow = |q0: f64| {
            let mut q = q0;
            let n = 10_000;
            let h = t_end / n as f64;
            let f = |t: f64, q: f64| -beta * q / (1.0 - beta * t);
            for i in 0..n {
                let t = i as f64 * h;
                let k1 = f(t, q);
                let k2 = f(t + h / 2.0, q + h / 2.0 * k1);
                let k3 = f(t + h / 2.0, q + h / 2.0 * k2);
                let k4 = f(t + h, q + h * k3);
                q += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            q
        };
        let scale = flow(1.0);
        assert!((m - 0.5 * scale).abs() < 1e-4, "mean {m}");
        assert!((v - 0.25 * scale * scale).abs() < 1e-4, "var {v}");
    }

    #[test]
    fn oversized_step_names_ratio() {
        let space = line(1.0, 401, 8.0);
        let x = space.grid().axis(0).coords();
        let rho = gaussian(&x, 0.0, 0.5);
        let mass = space.grid().integrate(&rho);
        let st = EnsembleState::new(rho.iter().map(|r| r / mass).collect(), vec![0.0; 401], 0.0);
        match evolve_madelung(&st, &space, 0.1, 1, MadelungOptions::default()) {
            Err(Error::Stability { ratio_name, .. }) => assert!(ratio_name.contains("dispersive")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
