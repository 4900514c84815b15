//! Emergent time for a homogeneous scalar on a classical cosmological
//! background.
//!
//! The background obeys the reduced Hamilton–Jacobi equation
//! `½ K_a (∂_a S₀)² + U(a) + ½ K_φ(a) p̄² = 0`, where `p̄` is the conserved
//! scalar momentum that sources it, and the rate equation
//! `ȧ = N K_a ∂_a S₀`. The scalar amplitude then evolves along `a(t)` by
//!
//! ```text
//! iħ' ∂_t ψ = N [ −(ħ'²/2) K_φ(a) ∂_φ² + Γ ] ψ
//! Γ_cl = −½ K_a (∂_a S₁)²
//! Γ_q  = −(ħ'²/2) |ψ|⁻¹ ∂_a(K_a ∂_a |ψ|)
//! ```
//!
//! with `a`-derivatives taken along the stored slices of the run, so that
//! `∂_t = ȧ ∂_a`. The phase entering `Γ_cl` has the global phase drift
//! between slices removed, which leaves energy eigenstates with `Γ_cl = 0`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::configspace::reduction::{frw_kinetic, frw_potential, scalar_kinetic, FRW_TABLE};
use crate::configspace::{ConfigSpace, PhysicalConstants, SpaceKind};
use crate::entropy::DENSITY_FLOOR;
use crate::error::{Error, Result};
use crate::grid::{Axis, Grid};
use crate::madelung::{ensemble_from_wave, evolve_schrodinger, WaveState};
use crate::ode::{dopri5_until, Halt, OdeOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Expanding,
    Contracting,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Expanding => 1.0,
            Direction::Contracting => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackgroundOptions {
    pub a0: f64,
    pub direction: Direction,
    /// Conserved scalar momentum sourcing the background.
    pub matter_momentum: f64,
    pub t_max: f64,
    pub rtol: f64,
}

impl Default for BackgroundOptions {
    fn default() -> Self {
        BackgroundOptions {
            a0: 1.0,
            direction: Direction::Expanding,
            matter_momentum: 1.0,
            t_max: 1.0,
            rtol: 1e-11,
        }
    }
}

/// Classical scale-factor history and the phase `S₀` on the `a` axis.
#[derive(Clone, Debug)]
pub struct BackgroundTrajectory {
    pub times: Vec<f64>,
    pub a: Vec<f64>,
    pub adot: Vec<f64>,
    /// Nodes of the space's scale-factor axis.
    pub a_grid: Vec<f64>,
    /// `S₀` on `a_grid`, `None` where the branch is imaginary or the
    /// kinetic coefficient vanishes.
    pub s0: Vec<Option<f64>>,
    pub direction: Direction,
    pub matter_momentum: f64,
    pub lapse: f64,
    /// Why the trajectory ends before `t_max`, if it does.
    pub truncation: Option<String>,
}

struct Geometry {
    curvature: i8,
    fiducial_volume: f64,
    a_axis: Axis,
}

fn geometry(space: &ConfigSpace) -> Result<Geometry> {
    match (space.kind(), space.curvature(), space.fiducial_volume()) {
        (SpaceKind::Frw | SpaceKind::Coupled, Some(curvature), Some(fiducial_volume)) => Ok(Geometry {
            curvature,
            fiducial_volume,
            a_axis: space.grid().axis(0).clone(),
        }),
        _ => Err(Error::WrongSpace(format!("expected a cosmological space, got {}", space.kind()))),
    }
}

fn check_constants(geo: &Geometry, constants: &PhysicalConstants) -> Result<()> {
    constants.validate()?;
    if constants.grav == 0.0 && geo.curvature != 0 {
        return Err(Error::param("grav", "curved backgrounds need G > 0"));
    }
    Ok(())
}

/// Right-hand side `−2 K_a (U + ½ K_φ p̄²)` of `ȧ² / N²`, with the scale of
/// its two terms.
fn discriminant(geo: &Geometry, constants: &PhysicalConstants, p_bar: f64, a: f64) -> (f64, f64) {
    let k = frw_kinetic(a, constants.grav, geo.fiducial_volume);
    if k == 0.0 {
        return (0.0, 0.0);
    }
    let u = frw_potential(a, geo.curvature, constants.grav, geo.fiducial_volume);
    let src = 0.5 * scalar_kinetic(a, geo.fiducial_volume) * p_bar * p_bar;
    (-2.0 * k * (u + src), 2.0 * k.abs() * (u.abs() + src))
}

/// `ȧ` from the rate equation, or `None` in the classically forbidden region.
pub fn background_rate(
    space: &ConfigSpace,
    constants: &PhysicalConstants,
    matter_momentum: f64,
    direction: Direction,
    a: f64,
) -> Result<Option<f64>> {
    let geo = geometry(space)?;
    check_constants(&geo, constants)?;
    Ok(rate(&geo, constants, matter_momentum, direction, a))
}

fn rate(geo: &Geometry, constants: &PhysicalConstants, p_bar: f64, direction: Direction, a: f64) -> Option<f64> {
    let (d, _) = discriminant(geo, constants, p_bar, a);
    (d >= 0.0).then(|| direction.sign() * constants.lapse * d.sqrt())
}

/// Relative size of the discriminant below which a turning point is declared.
const TURNING_TOLERANCE: f64 = 1e-9;

pub fn solve_background(
    space: &ConfigSpace,
    constants: &PhysicalConstants,
    opts: &BackgroundOptions,
) -> Result<BackgroundTrajectory> {
    let geo = geometry(space)?;
    check_constants(&geo, constants)?;
    let (lo, hi) = (geo.a_axis.min, geo.a_axis.max);
    if !(opts.a0 >= lo && opts.a0 <= hi) {
        return Err(Error::param("a0", format!("{} lies outside the scale-factor window [{lo}, {hi}]", opts.a0)));
    }
    if !(opts.t_max > 0.0 && opts.t_max.is_finite()) {
        return Err(Error::param("t_max", "must be positive"));
    }
    let p_bar = opts.matter_momentum;
    let (d0, scale0) = discriminant(&geo, constants, p_bar, opts.a0);
    if d0 < 0.0 || (scale0 > 0.0 && d0 <= TURNING_TOLERANCE * scale0) {
        return Err(Error::IllPosed(format!("no real branch at a0 = {}", opts.a0)));
    }
    let rhs = |_: f64, y: &[f64]| {
        let a = y[0];
        if !(a >= lo && a <= hi) {
            return None;
        }
        rate(&geo, constants, p_bar, opts.direction, a).map(|v| vec![v])
    };
    let stop = |_: f64, y: &[f64]| {
        let (d, scale) = discriminant(&geo, constants, p_bar, y[0]);
        scale > 0.0 && d <= TURNING_TOLERANCE * scale
    };
    let ode = OdeOptions {
        rtol: opts.rtol,
        atol: opts.rtol * opts.a0,
        initial_step: opts.t_max * 1e-4,
        min_step: opts.t_max * 1e-13,
        max_step: opts.t_max / 64.0,
        ..OdeOptions::default()
    };
    let sol = dopri5_until(rhs, stop, 0.0, &[opts.a0], opts.t_max, &ode)?;
    let a: Vec<f64> = sol.y.iter().map(|y| y[0]).collect();
    let adot: Vec<f64> = a
        .iter()
        .map(|&x| rate(&geo, constants, p_bar, opts.direction, x).unwrap_or(0.0))
        .collect();
    let truncation = sol.halt.map(|h| match h {
        Halt::Event { t } => format!("turning point at t = {t:.6e}"),
        Halt::Undefined { t } => {
            let end = *a.last().expect("trajectory holds its start");
            if (end - lo).abs() < 1e-3 * (hi - lo) || (end - hi).abs() < 1e-3 * (hi - lo) {
                format!("left the scale-factor window at t = {t:.6e}")
            } else {
                format!("entered the classically forbidden region at t = {t:.6e}")
            }
        }
    });
    let a_grid = geo.a_axis.coords();
    let s0 = phase_on_grid(&geo, constants, p_bar, opts.direction, &a_grid);
    Ok(BackgroundTrajectory {
        times: sol.t,
        a,
        adot,
        a_grid,
        s0,
        direction: opts.direction,
        matter_momentum: p_bar,
        lapse: constants.lapse,
        truncation,
    })
}

/// Trapezoid quadrature of `∂_a S₀ = ȧ / (N K_a)`, restarted after every
/// gap in the real branch.
fn phase_on_grid(
    geo: &Geometry,
    constants: &PhysicalConstants,
    p_bar: f64,
    direction: Direction,
    a_grid: &[f64],
) -> Vec<Option<f64>> {
    let slope: Vec<Option<f64>> = a_grid
        .iter()
        .map(|&a| {
            let k = frw_kinetic(a, constants.grav, geo.fiducial_volume);
            if k == 0.0 {
                return None;
            }
            rate(geo, constants, p_bar, direction, a).map(|v| v / (constants.lapse * k))
        })
        .collect();
    let mut out = Vec::with_capacity(a_grid.len());
    let mut acc: Option<f64> = None;
    for i in 0..a_grid.len() {
        acc = match (acc, slope[i]) {
            (_, None) => None,
            (None, Some(_)) => Some(0.0),
            (Some(s), Some(d)) => {
                let prev = slope[i - 1].expect("accumulating implies a real branch at the previous node");
                Some(s + 0.5 * (a_grid[i] - a_grid[i - 1]) * (prev + d))
            }
        };
        out.push(acc);
    }
    out
}

impl BackgroundTrajectory {
    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory holds its start")
    }

    /// Cubic Hermite interpolation of `(a, ȧ)` at time `t`.
    pub fn at(&self, t: f64) -> Result<(f64, f64)> {
        let (t0, t1) = (self.times[0], self.t_end());
        let slack = 1e-12 * (t1 - t0).abs().max(1.0);
        if t < t0 - slack || t > t1 + slack {
            return Err(Error::WindowExhausted { t });
        }
        let t = t.clamp(t0, t1);
        if self.times.len() == 1 {
            return Ok((self.a[0], self.adot[0]));
        }
        let i = self.times.partition_point(|&x| x <= t).clamp(1, self.times.len() - 1) - 1;
        let h = self.times[i + 1] - self.times[i];
        let s = (t - self.times[i]) / h;
        let (y0, y1, m0, m1) = (self.a[i], self.a[i + 1], self.adot[i] * h, self.adot[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let a = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1;
        let da = ((6.0 * s2 - 6.0 * s) * y0 + (3.0 * s2 - 4.0 * s + 1.0) * m0 + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * m1)
            / h;
        Ok((a, da))
    }

    /// Largest deviation of the stored `ȧ` from the rate equation.
    pub fn rate_residual(&self, space: &ConfigSpace, constants: &PhysicalConstants) -> Result<f64> {
        let geo = geometry(space)?;
        Ok(self
            .a
            .iter()
            .zip(&self.adot)
            .map(|(&a, &v)| match rate(&geo, constants, self.matter_momentum, self.direction, a) {
                Some(r) => (r - v).abs(),
                None => v.abs(),
            })
            .fold(0.0, f64::max))
    }
}

/// One stored slice of the scalar amplitude.
#[derive(Clone, Debug, PartialEq)]
pub struct EmergentSlice {
    pub t: f64,
    pub a: f64,
    pub psi: Vec<Complex64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub a: f64,
    pub norm: f64,
    pub gamma_cl_max: f64,
    pub gamma_q_max: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmergentOptions {
    pub corrections_on: bool,
    pub record_every: usize,
}

impl Default for EmergentOptions {
    fn default() -> Self {
        EmergentOptions {
            corrections_on: true,
            record_every: 1,
        }
    }
}

/// State of an emergent-time evolution.
#[derive(Clone, Debug)]
pub struct EmergentRun {
    pub phi: Grid,
    /// The newest slices, oldest first; at most three are kept.
    pub history: Vec<EmergentSlice>,
    pub states: Vec<WaveState>,
    pub records: Vec<StepRecord>,
    pub gamma_cl: Vec<f64>,
    pub gamma_q: Vec<f64>,
    pub options: EmergentOptions,
}

const STENCIL: usize = 3;

impl EmergentRun {
    /// Start from `psi` on the scalar axis of a coupled space at scale factor `a`.
    pub fn new(space: &ConfigSpace, psi: WaveState, a: f64, options: EmergentOptions) -> Result<Self> {
        let phi = scalar_grid(space)?;
        if psi.psi.len() != phi.len() {
            return Err(Error::ShapeMismatch {
                expected: phi.len(),
                got: psi.psi.len(),
            });
        }
        let n = phi.len();
        Ok(EmergentRun {
            history: vec![EmergentSlice {
                t: psi.time,
                a,
                psi: psi.psi.clone(),
            }],
            states: vec![psi],
            records: Vec::new(),
            gamma_cl: vec![0.0; n],
            gamma_q: vec![0.0; n],
            options,
            phi,
        })
    }

    /// A run holding the given slices, for evaluating correction terms on
    /// prescribed amplitudes.
    pub fn from_slices(space: &ConfigSpace, slices: Vec<EmergentSlice>, options: EmergentOptions) -> Result<Self> {
        let phi = scalar_grid(space)?;
        if slices.is_empty() {
            return Err(Error::Degenerate("no slices given".into()));
        }
        if let Some(bad) = slices.iter().find(|s| s.psi.len() != phi.len()) {
            return Err(Error::ShapeMismatch {
                expected: phi.len(),
                got: bad.psi.len(),
            });
        }
        let last = slices.last().expect("non-empty");
        let states = vec![WaveState::new(last.psi.clone(), last.t)];
        let n = phi.len();
        let keep = slices.len().saturating_sub(STENCIL);
        Ok(EmergentRun {
            history: slices[keep..].to_vec(),
            states,
            records: Vec::new(),
            gamma_cl: vec![0.0; n],
            gamma_q: vec![0.0; n],
            options,
            phi,
        })
    }

    pub fn current(&self) -> &EmergentSlice {
        self.history.last().expect("run holds a slice")
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,a,norm,gamma_cl_max,gamma_q_max")?;
        for r in &self.records {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.t, r.a, r.norm, r.gamma_cl_max, r.gamma_q_max
            )?;
        }
        Ok(())
    }
}

fn scalar_grid(space: &ConfigSpace) -> Result<Grid> {
    if space.kind() != SpaceKind::Coupled || space.dim() != 2 {
        return Err(Error::WrongSpace(format!("expected a coupled space, got {}", space.kind())));
    }
    Grid::new(vec![space.grid().axis(1).clone()])
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Backward three-point derivatives at the newest slice.
struct SliceDerivatives {
    a: f64,
    amplitude: Vec<f64>,
    /// `∂_a S₁` with the global phase drift removed, in units of `ħ'`.
    phase: Vec<f64>,
    amplitude_1: Vec<f64>,
    amplitude_2: Vec<f64>,
}

fn slice_derivatives(history: &[EmergentSlice]) -> Result<SliceDerivatives> {
    if history.len() < STENCIL {
        return Err(Error::Degenerate(format!(
            "need {STENCIL} slices for scale-factor derivatives, have {}",
            history.len()
        )));
    }
    let s = &history[history.len() - STENCIL..];
    let (x0, x1, x2) = (s[0].a, s[1].a, s[2].a);
    if x0 == x1 || x1 == x2 || x0 == x2 {
        return Err(Error::Degenerate("scale factor is frozen across the stored slices".into()));
    }
    // Lagrange weights on (x0, x1, x2); both sets sum to zero, so they are
    // applied to differences from the newest slice.
    let d1 = [
        (x2 - x1) / ((x0 - x1) * (x0 - x2)),
        (x2 - x0) / ((x1 - x0) * (x1 - x2)),
    ];
    let d2 = [2.0 / ((x0 - x1) * (x0 - x2)), 2.0 / ((x1 - x0) * (x1 - x2))];
    let drift = |k: usize| {
        let z: Complex64 = s[k].psi.iter().zip(&s[2].psi).map(|(p, q)| p * q.conj()).sum();
        z.arg()
    };
    let g = [drift(0), drift(1)];
    let n = s[2].psi.len();
    let mut out = SliceDerivatives {
        a: x2,
        amplitude: Vec::with_capacity(n),
        phase: Vec::with_capacity(n),
        amplitude_1: Vec::with_capacity(n),
        amplitude_2: Vec::with_capacity(n),
    };
    for j in 0..n {
        let r2 = s[2].psi[j].norm();
        let dr = [s[0].psi[j].norm() - r2, s[1].psi[j].norm() - r2];
        let dth = [
            wrap((s[0].psi[j] * s[2].psi[j].conj()).arg() - g[0]),
            wrap((s[1].psi[j] * s[2].psi[j].conj()).arg() - g[1]),
        ];
        out.amplitude.push(r2);
        out.phase.push(d1[0] * dth[0] + d1[1] * dth[1]);
        out.amplitude_1.push(d1[0] * dr[0] + d1[1] * dr[1]);
        out.amplitude_2.push(d2[0] * dr[0] + d2[1] * dr[1]);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GammaTerms {
    pub cl: Vec<f64>,
    pub q: Vec<f64>,
}

impl GammaTerms {
    pub fn max_abs(&self) -> (f64, f64) {
        let m = |v: &[f64]| v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        (m(&self.cl), m(&self.q))
    }

    /// `‖Γ_cl + Γ_q‖∞`.
    pub fn total_max(&self) -> f64 {
        self.cl.iter().zip(&self.q).fold(0.0f64, |acc, (c, q)| acc.max((c + q).abs()))
    }
}

/// Correction terms at the newest slice of `run`.
pub fn gamma_terms(run: &EmergentRun, space: &ConfigSpace, constants: &PhysicalConstants) -> Result<GammaTerms> {
    let geo = geometry(space)?;
    let n = run.phi.len();
    let a = run.current().a;
    let k = frw_kinetic(a, constants.grav, geo.fiducial_volume);
    if k == 0.0 {
        return Ok(GammaTerms {
            cl: vec![0.0; n],
            q: vec![0.0; n],
        });
    }
    let d = slice_derivatives(&run.history)?;
    let dk = FRW_TABLE.kinetic.power as f64 * k / d.a;
    let hb = constants.effective_hbar();
    let cl = d.phase.iter().map(|p| -0.5 * k * (hb * p).powi(2)).collect();
    let q = (0..n)
        .map(|j| {
            let r = d.amplitude[j];
            if r * r <= DENSITY_FLOOR {
                0.0
            } else {
                -0.5 * hb * hb * (k * d.amplitude_2[j] + dk * d.amplitude_1[j]) / r
            }
        })
        .collect();
    Ok(GammaTerms { cl, q })
}

/// Largest phase a correction term may add in one step, `N dt ‖Γ‖∞ / ħ'`.
pub const GAMMA_PHASE_LIMIT: f64 = 1.0;

/// Advance the scalar amplitude by `steps` Crank–Nicolson steps along the
/// background. Each step uses `K_φ` at the midpoint scale factor and the
/// correction terms of the newest slice.
pub fn evolve_emergent(
    run: &EmergentRun,
    background: &BackgroundTrajectory,
    space: &ConfigSpace,
    constants: &PhysicalConstants,
    dt: f64,
    steps: usize,
) -> Result<EmergentRun> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    let geo = geometry(space)?;
    check_constants(&geo, constants)?;
    let mut run = run.clone();
    let record_every = run.options.record_every.max(1);
    let n = run.phi.len();
    for step in 1..=steps {
        let t = run.current().t;
        let (a_mid, _) = background.at(t + 0.5 * dt)?;
        let (a_next, _) = background.at(t + dt)?;
        let gamma = if run.history.len() >= STENCIL {
            gamma_terms(&run, space, constants)?
        } else {
            GammaTerms {
                cl: vec![0.0; n],
                q: vec![0.0; n],
            }
        };
        let (gcl, gq) = gamma.max_abs();
        let potential: Vec<f64> = if run.options.corrections_on {
            let phase = constants.lapse * dt * gamma.total_max() / constants.effective_hbar();
            if phase > GAMMA_PHASE_LIMIT {
                return Err(Error::Stability {
                    ratio_name: "correction phase per step",
                    value: phase,
                    limit: GAMMA_PHASE_LIMIT,
                });
            }
            gamma.cl.iter().zip(&gamma.q).map(|(c, q)| c + q).collect()
        } else {
            vec![0.0; n]
        };
        let sector = ConfigSpace::uniform(
            SpaceKind::ScalarLattice,
            run.phi.clone(),
            vec![scalar_kinetic(a_mid, geo.fiducial_volume)],
            potential,
            *constants,
        )?;
        let start = WaveState::new(run.current().psi.clone(), t);
        let next = evolve_schrodinger(&start, &sector, dt, 1, 1)?.last().clone();
        let norm = next.norm_sqr(&run.phi);
        run.gamma_cl = gamma.cl;
        run.gamma_q = gamma.q;
        run.records.push(StepRecord {
            t,
            a: run.current().a,
            norm,
            gamma_cl_max: gcl,
            gamma_q_max: gq,
        });
        run.history.push(EmergentSlice {
            t: t + dt,
            a: a_next,
            psi: next.psi.clone(),
        });
        if run.history.len() > STENCIL {
            run.history.remove(0);
        }
        if step % record_every == 0 || step == steps {
            run.states.push(WaveState::new(next.psi, t + dt));
        }
    }
    Ok(run)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuppressionReport {
    /// `(G, ‖Γ‖∞ / E_kin)` rows.
    pub grav_rows: Vec<(f64, f64)>,
    /// `(ħ, ‖Γ‖∞ / E_kin)` rows.
    pub hbar_rows: Vec<(f64, f64)>,
    pub grav_slope: f64,
    pub hbar_slope: f64,
}

fn log_slope(rows: &[(f64, f64)]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Degenerate("a sweep needs two positive rows".into()));
    }
    let (lo, hi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.0), h.max(p.0)));
    if hi - lo < 10f64.ln() - 1e-12 {
        return Err(Error::Degenerate("a sweep must span at least one decade".into()));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Size of the correction terms relative to the scalar kinetic energy
/// `N p̄² K_φ / 2`, swept in `G` (at the base `ħ`) and in `ħ` (at the base
/// `G`) with the amplitude slices of `run` held fixed.
pub fn suppression_scan(
    run: &EmergentRun,
    background: &BackgroundTrajectory,
    space: &ConfigSpace,
    constants: &PhysicalConstants,
    grav_list: &[f64],
    hbar_list: &[f64],
) -> Result<SuppressionReport> {
    let geo = geometry(space)?;
    let p = background.matter_momentum;
    let energy = 0.5 * constants.lapse * p * p * scalar_kinetic(run.current().a, geo.fiducial_volume);
    if !(energy > 0.0) {
        return Err(Error::Degenerate("the background carries no scalar momentum".into()));
    }
    let ratio = |c: PhysicalConstants| -> Result<f64> { Ok(gamma_terms(run, space, &c)?.total_max() / energy) };
    let grav_rows = grav_list
        .iter()
        .map(|&g| Ok((g, ratio(constants.with_grav(g))?)))
        .collect::<Result<Vec<_>>>()?;
    let hbar_rows = hbar_list
        .iter()
        .map(|&h| Ok((h, ratio(constants.with_hbar(h))?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SuppressionReport {
        grav_slope: log_slope(&grav_rows)?,
        hbar_slope: log_slope(&hbar_rows)?,
        grav_rows,
        hbar_rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzReport {
    /// `max |∂_a ln ρ₁| / |∂_a ln ρ₀|`.
    pub ratio_rho: f64,
    /// `max |∂_a S₁| / |∂_a S₀|`.
    pub ratio_s: f64,
    pub threshold: f64,
    pub valid: bool,
}

pub const ANSATZ_THRESHOLD: f64 = 0.1;

/// Compare the scale-factor dependence of the scalar amplitude with that of
/// a gravitational amplitude `psi0` on the space's `a` axis.
pub fn ansatz_diagnostics(
    run: &EmergentRun,
    psi0: &WaveState,
    space: &ConfigSpace,
    constants: &PhysicalConstants,
    threshold: f64,
) -> Result<AnsatzReport> {
    let geo = geometry(space)?;
    let a_grid = Grid::new(vec![geo.a_axis.clone()])?;
    let split = ensemble_from_wave(psi0, &a_grid, constants, 0)?;
    let a = run.current().a;
    let log_rho: Vec<f64> = split.state.rho.iter().map(|r| r.max(DENSITY_FLOOR).ln()).collect();
    let at = |values: &[f64]| -> Result<f64> {
        a_grid
            .interpolate_cubic(&a_grid.derivative(values, 0), &[a])
            .ok_or_else(|| Error::param("a", format!("{a} lies outside the gravitational grid")))
    };
    let rho0 = at(&log_rho)?.abs();
    let s0 = at(&split.state.s)?.abs();
    let d = slice_derivatives(&run.history)?;
    let hb = constants.effective_hbar();
    let mut rho1: f64 = 0.0;
    let mut s1: f64 = 0.0;
    for j in 0..d.amplitude.len() {
        let r = d.amplitude[j];
        if r * r <= DENSITY_FLOOR {
            continue;
        }
        rho1 = rho1.max((2.0 * d.amplitude_1[j] / r).abs());
        s1 = s1.max((hb * d.phase[j]).abs());
    }
    let ratio = |num: f64, den: f64| {
        if num == 0.0 {
            0.0
        } else if den == 0.0 {
            f64::INFINITY
        } else {
            num / den
        }
    };
    let (ratio_rho, ratio_s) = (ratio(rho1, rho0), ratio(s1, s0));
    Ok(AnsatzReport {
        ratio_rho,
        ratio_s,
        threshold,
        valid: ratio_rho <= threshold && ratio_s <= threshold,
    })
}
