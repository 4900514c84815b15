//! Density/phase pairs and complex amplitudes on a configuration grid, the
//! quantum potential that couples them, and the two time evolvers whose
//! agreement certifies the correspondence between them.

mod hydro;
mod schrodinger;

pub use hydro::{evolve_madelung, MadelungOptions, MadelungRun};
pub use schrodinger::{
    evolve_schrodinger, ground_state, hamiltonian_matrix, GroundState, KineticStencil, SchrodingerRun,
};

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::configspace::{ConfigSpace, PhysicalConstants};
use crate::entropy::DENSITY_FLOOR;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Probability density and phase on the nodes of a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleState {
    pub rho: Vec<f64>,
    pub s: Vec<f64>,
    pub time: f64,
}

impl EnsembleState {
    pub fn new(rho: Vec<f64>, s: Vec<f64>, time: f64) -> Self {
        EnsembleState { rho, s, time }
    }

    /// Checks shapes, sign, and unit mass within `1e-8`.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if self.s.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                got: self.s.len(),
            });
        }
        crate::entropy::check_normalized(grid, &self.rho)
    }

    pub fn write_csv<W: Write>(&self, grid: &Grid, constants: &PhysicalConstants, mut out: W) -> Result<()> {
        let wave = wave_from_ensemble(self, constants);
        let names: Vec<&str> = grid.axes().iter().map(|a| a.name.as_str()).collect();
        writeln!(out, "{},rho,S,re_psi,im_psi", names.join(","))?;
        for f in 0..grid.len() {
            let coords: Vec<String> = grid.point(f).iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e}",
                coords.join(","),
                self.rho[f],
                self.s[f],
                wave.psi[f].re,
                wave.psi[f].im
            )?;
        }
        Ok(())
    }
}

/// Complex amplitude on the nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveState {
    pub psi: Vec<Complex64>,
    pub time: f64,
}

impl WaveState {
    pub fn new(psi: Vec<Complex64>, time: f64) -> Self {
        WaveState { psi, time }
    }

    /// `∫|ψ|²` with flat grid quadrature.
    pub fn norm_sqr(&self, grid: &Grid) -> f64 {
        let d: Vec<f64> = self.psi.iter().map(|z| z.norm_sqr()).collect();
        grid.integrate(&d)
    }

    /// Unit-normalized copy.
    pub fn normalized(&self, grid: &Grid) -> Result<WaveState> {
        let n = self.norm_sqr(grid).sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Degenerate("cannot normalize a zero amplitude".into()));
        }
        Ok(WaveState {
            psi: self.psi.iter().map(|z| z / n).collect(),
            time: self.time,
        })
    }

    /// Quadrature L2 distance `(∫|ψ − φ|²)^{1/2}`.
    pub fn distance(&self, other: &WaveState, grid: &Grid) -> f64 {
        let d: Vec<f64> = self
            .psi
            .iter()
            .zip(&other.psi)
            .map(|(a, b)| (a - b).norm_sqr())
            .collect();
        grid.integrate(&d).sqrt()
    }

    pub fn write_csv<W: Write>(&self, grid: &Grid, mut out: W) -> Result<()> {
        let names: Vec<&str> = grid.axes().iter().map(|a| a.name.as_str()).collect();
        writeln!(out, "node,{},re_psi,im_psi", names.join(","))?;
        for f in 0..grid.len() {
            let coords: Vec<String> = grid.point(f).iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(out, "{f},{},{:.16e},{:.16e}", coords.join(","), self.psi[f].re, self.psi[f].im)?;
        }
        Ok(())
    }
}

/// `ψ = √ρ exp(iS/ħ')` with `ħ' = √α ħ`.
pub fn wave_from_ensemble(state: &EnsembleState, constants: &PhysicalConstants) -> WaveState {
    let k = constants.effective_hbar();
    let psi = state
        .rho
        .iter()
        .zip(&state.s)
        .map(|(&r, &s)| Complex64::from_polar(r.max(0.0).sqrt(), s / k))
        .collect();
    WaveState { psi, time: state.time }
}

/// Density and phase recovered from an amplitude, with the nodes whose
/// phase could not be resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseExtraction {
    pub state: EnsembleState,
    /// Nodes with `|ψ|²` below the density floor; their phase is carried
    /// over from the unwrapping reference.
    pub masked: Vec<usize>,
}

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

/// Inverse of [`wave_from_ensemble`]. The phase is unwrapped in
/// axis-major node order: each node refers to its predecessor along the
/// fastest axis, and the first node of a line refers to the first node of
/// the previous line. `branch` picks the sheet of the very first node.
pub fn ensemble_from_wave(
    wave: &WaveState,
    grid: &Grid,
    constants: &PhysicalConstants,
    branch: i64,
) -> Result<PhaseExtraction> {
    if wave.psi.len() != grid.len() {
        return Err(Error::ShapeMismatch {
            expected: grid.len(),
            got: wave.psi.len(),
        });
    }
    let k = constants.effective_hbar();
    let n = grid.len();
    let mut theta = vec![0.0; n];
    let mut masked = Vec::new();
    for f in 0..n {
        let arg = wave.psi[f].arg();
        let reference = (0..grid.dim())
            .rev()
            .find_map(|axis| {
                let i = grid.index_along(f, axis);
                (i > 0).then(|| f - grid.stride(axis))
            })
            .map(|r| theta[r]);
        let small = wave.psi[f].norm_sqr() < DENSITY_FLOOR;
        if small {
            masked.push(f);
        }
        theta[f] = match reference {
            None => arg + 2.0 * PI * branch as f64,
            Some(r) if small => r,
            Some(r) => r + wrap(arg - r),
        };
    }
    Ok(PhaseExtraction {
        state: EnsembleState {
            rho: wave.psi.iter().map(|z| z.norm_sqr()).collect(),
            s: theta.iter().map(|t| t * k).collect(),
            time: wave.time,
        },
        masked,
    })
}

/// Quantum potential `Q = −(α ħ²/2) (1/√ρ) Σ_A ∂_A(K_A ∂_A √ρ)`, evaluated
/// in expanded form `K R'' + K' R'`. Nodes below the density floor, and
/// nodes on non-periodic boundaries, are set to zero.
pub fn bohm_potential(rho: &[f64], space: &ConfigSpace) -> Vec<f64> {
    let grid = space.grid();
    let k2 = space.constants().effective_hbar().powi(2);
    let r: Vec<f64> = rho.iter().map(|v| v.max(0.0).sqrt()).collect();
    let mut acc = vec![0.0; grid.len()];
    for axis in 0..grid.dim() {
        let coeff = space.kinetic_along(axis);
        let div = grid.divergence_expanded(&coeff, &r, axis);
        for (a, d) in acc.iter_mut().zip(div) {
            *a += d;
        }
    }
    (0..grid.len())
        .map(|f| {
            if rho[f] <= DENSITY_FLOOR || grid.on_boundary(f) {
                0.0
            } else {
                -0.5 * k2 * acc[f] / r[f]
            }
        })
        .collect()
}

/// Number of nodes [`bohm_potential`] masks.
pub fn masked_nodes(rho: &[f64], grid: &Grid) -> usize {
    (0..grid.len())
        .filter(|&f| rho[f] <= DENSITY_FLOOR || grid.on_boundary(f))
        .count()
}
