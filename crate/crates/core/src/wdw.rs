//! Wheeler–DeWitt constraint operator on minisuperspace grids.
//!
//! The operator is `α K + V` with
//!
//! ```text
//! K ψ = −(ħ²/2) N Σ_A ∂_A(K_A ∂_A ψ)      (divergence ordering)
//! K ψ = −(ħ²/2) N Σ_A K_A ∂_A² ψ          (naive ordering)
//! V ψ = N U ψ
//! ```
//!
//! where `K_A` is the kinetic coefficient of the space. The divergence
//! ordering evaluates `K_A` at half nodes, which keeps the matrix symmetric.
//! Rows at a non-periodic edge only carry the faces that exist.
//!
//! Zero modes are found along the first axis: two-point data in one
//! dimension, and marching from an initial slice when a second axis is
//! present (the constraint is hyperbolic there).

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::configspace::{ConfigSpace, SpaceKind};
use crate::entropy::DENSITY_FLOOR;
use crate::error::{Error, Result};
use crate::linalg::{pairwise_sum, thomas, Csr};
use crate::madelung::{ensemble_from_wave, WaveState};
use crate::variational::{current_divergence, quantum_hj, ResidualReport};

/// Placement of the kinetic coefficient relative to the derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ordering {
    /// `∂(K ∂ψ)`: the coefficient sits between the derivatives.
    Paper,
    /// `K ∂²ψ`: the coefficient sits outside.
    Naive,
}

impl std::fmt::Display for Ordering {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Ordering::Paper => "paper",
            Ordering::Naive => "naive",
        })
    }
}

#[derive(Clone, Debug)]
pub struct WdwOperator {
    /// `alpha * kinetic + potential`.
    pub matrix: Csr,
    /// Kinetic block at unit Tsallis order.
    pub kinetic: Csr,
    /// Diagonal potential block.
    pub potential: Csr,
    pub ordering: Ordering,
    pub alpha: f64,
    space: ConfigSpace,
}

/// Kinetic weight for the link from `f` towards `offset` along `axis`.
fn link_weight(space: &ConfigSpace, ordering: Ordering, f: usize, axis: usize, offset: isize) -> f64 {
    match ordering {
        Ordering::Paper => {
            let mut p = space.grid().point(f);
            p[axis] += 0.5 * offset as f64 * space.grid().axis(axis).spacing();
            space.kinetic_at(&p)[axis]
        }
        Ordering::Naive => space.kinetic(f, axis),
    }
}

/// Prefactor `−(ħ²/2) N / h²` of the kinetic stencil along `axis`.
fn stencil_scale(space: &ConfigSpace, axis: usize) -> f64 {
    let c = space.constants();
    -0.5 * c.hbar * c.hbar * c.lapse / space.grid().axis(axis).spacing().powi(2)
}

pub fn build_wdw_operator(space: &ConfigSpace, ordering: Ordering) -> Result<WdwOperator> {
    if space.kind() == SpaceKind::ScalarLattice {
        return Err(Error::WrongSpace(
            "the constraint operator needs a gravitational space, got scalar-lattice".into(),
        ));
    }
    let grid = space.grid();
    let n = grid.len();
    let lapse = space.constants().lapse;
    let alpha = space.constants().alpha;
    let rows: Vec<Vec<(usize, usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|f| {
            let mut row = Vec::with_capacity(1 + 2 * grid.dim());
            let mut diag = 0.0;
            for axis in 0..grid.dim() {
                let scale = stencil_scale(space, axis);
                for offset in [-1isize, 1] {
                    if let Some(nb) = grid.neighbor(f, axis, offset) {
                        let w = scale * link_weight(space, ordering, f, axis, offset);
                        row.push((f, nb, w));
                        diag -= w;
                    }
                }
            }
            row.push((f, f, diag));
            row
        })
        .collect();
    let kinetic = Csr::from_triplets(n, n, rows.into_iter().flatten().collect());
    let potential = Csr::from_triplets(n, n, (0..n).map(|f| (f, f, lapse * space.potential()[f])).collect());
    let matrix = kinetic.combine(alpha, &potential, 1.0);
    Ok(WdwOperator {
        matrix,
        kinetic,
        potential,
        ordering,
        alpha,
        space: space.clone(),
    })
}

impl WdwOperator {
    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        self.matrix.matvec_complex(psi)
    }

    /// Node-wise `(Op ψ)/ψ`; zero where `|ψ|²` is below the density floor.
    pub fn local_ratio(&self, psi: &[Complex64]) -> Vec<Complex64> {
        self.apply(psi)
            .into_iter()
            .zip(psi)
            .map(|(o, p)| {
                if p.norm_sqr() <= DENSITY_FLOOR {
                    Complex64::new(0.0, 0.0)
                } else {
                    o / p
                }
            })
            .collect()
    }

    /// Matrix Market coordinate listing with one-based indices.
    pub fn write_coo<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "% ordering={} alpha={:.16e}", self.ordering, self.alpha)?;
        writeln!(out, "{} {} {}", self.matrix.rows, self.matrix.cols, self.matrix.nnz())?;
        for (r, c, v) in self.matrix.triplets() {
            writeln!(out, "{} {} {v:.16e}", r + 1, c + 1)?;
        }
        Ok(())
    }
}

/// Data fixing a zero mode along the first axis.
#[derive(Clone, Debug, PartialEq)]
pub enum Boundary {
    /// Values at both ends of a one-dimensional grid.
    Values { left: Complex64, right: Complex64 },
    /// Value at the left end; the amplitude vanishes at the right end.
    Decay { left: Complex64 },
    /// Amplitude and first-axis derivative on the first slice, one entry per
    /// node of the slice.
    Initial { value: Vec<Complex64>, slope: Vec<Complex64> },
}

#[derive(Clone, Debug)]
pub struct ZeroMode {
    pub wave: WaveState,
    /// `‖Op ψ‖ / ‖ψ‖` over the rows the solver enforces.
    pub residual: f64,
}

/// Courant limit for marching in the first axis.
pub const MARCHING_LIMIT: f64 = 1.0;

pub fn solve_wdw(op: &WdwOperator, boundary: &Boundary, tol: f64) -> Result<ZeroMode> {
    let grid = op.space.grid();
    if grid.axis(0).periodic {
        return Err(Error::IllPosed("the evolution axis cannot be periodic".into()));
    }
    if grid.axis(0).points < 3 {
        return Err(Error::param("grid", "need at least three nodes along the first axis"));
    }
    let (psi, rows) = match boundary {
        Boundary::Values { left, right } => two_point(op, *left, *right)?,
        Boundary::Decay { left } => two_point(op, *left, Complex64::new(0.0, 0.0))?,
        Boundary::Initial { value, slope } => march(op, value, slope)?,
    };
    let applied = op.apply(&psi);
    let num: Vec<f64> = rows.iter().map(|&f| applied[f].norm_sqr()).collect();
    let den: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
    let den = pairwise_sum(&den).sqrt();
    if !(den > 0.0) {
        return Err(Error::Degenerate("boundary data produce the zero amplitude".into()));
    }
    let residual = pairwise_sum(&num).sqrt() / den;
    if !(residual <= tol) {
        return Err(Error::NoConvergence {
            method: "wdw zero mode",
            iterations: 1,
            residual,
        });
    }
    Ok(ZeroMode {
        wave: WaveState::new(psi, 0.0),
        residual,
    })
}

fn two_point(op: &WdwOperator, left: Complex64, right: Complex64) -> Result<(Vec<Complex64>, Vec<usize>)> {
    let grid = op.space.grid();
    if grid.dim() != 1 {
        return Err(Error::IllPosed(
            "two-sided data on a hyperbolic constraint; give an initial slice instead".into(),
        ));
    }
    let n = grid.len();
    let m = n - 2;
    let a = &op.matrix;
    let z = Complex64::new(0.0, 0.0);
    let (mut sub, mut diag, mut sup, mut rhs) = (vec![z; m], vec![z; m], vec![z; m], vec![z; m]);
    for r in 0..m {
        let f = r + 1;
        diag[r] = a.get(f, f).into();
        if f > 1 {
            sub[r] = a.get(f, f - 1).into();
        }
        if f + 2 < n {
            sup[r] = a.get(f, f + 1).into();
        }
    }
    rhs[0] -= a.get(1, 0) * left;
    rhs[m - 1] -= a.get(n - 2, n - 1) * right;
    let inner = thomas(&sub, &diag, &sup, &rhs)?;
    let mut psi = Vec::with_capacity(n);
    psi.push(left);
    psi.extend(inner);
    psi.push(right);
    Ok((psi, (1..n - 1).collect()))
}

fn march(op: &WdwOperator, value: &[Complex64], slope: &[Complex64]) -> Result<(Vec<Complex64>, Vec<usize>)> {
    let space = &op.space;
    let grid = space.grid();
    let stride = grid.stride(0);
    let slices = grid.axis(0).points;
    let width = grid.len() / slices;
    if value.len() != width || slope.len() != width {
        return Err(Error::ShapeMismatch {
            expected: width,
            got: value.len().min(slope.len()),
        });
    }
    check_courant(space)?;
    let slice_node = |i: usize, j: usize| i * stride + (j / stride) * stride * slices + j % stride;
    let a = &op.matrix;
    let h = grid.axis(0).spacing();
    let mut psi = vec![Complex64::new(0.0, 0.0); grid.len()];
    for j in 0..width {
        psi[slice_node(0, j)] = value[j];
    }
    // First step: the equation on the initial slice with a reflected ghost
    // node `ψ₋₁ = ψ₁ − 2h ∂ψ`.
    for j in 0..width {
        let f = slice_node(0, j);
        let up = f + stride;
        let ghost = op.alpha * stencil_scale(space, 0) * link_weight(space, op.ordering, f, 0, -1);
        if op.ordering == Ordering::Paper && grid.axis(0).coord(0) - 0.5 * h <= 0.0 {
            return Err(Error::IllPosed("ghost face of the initial slice leaves the domain".into()));
        }
        let rest: Complex64 = a.row(f).filter(|&(c, _)| c != up).map(|(c, v)| v * psi[c]).sum();
        let lead = a.get(f, up) + ghost;
        if lead == 0.0 {
            return Err(Error::IllPosed(format!("initial slice decouples at node {f}")));
        }
        psi[up] = (ghost * (psi[f] + 2.0 * h * slope[j]) - rest) / lead;
    }
    for i in 1..slices - 1 {
        for j in 0..width {
            let f = slice_node(i, j);
            let up = f + stride;
            let lead = a.get(f, up);
            if lead == 0.0 {
                return Err(Error::IllPosed(format!("marching coefficient vanishes at node {f}")));
            }
            let rest: Complex64 = a.row(f).filter(|&(c, _)| c != up).map(|(c, v)| v * psi[c]).sum();
            psi[up] = -rest / lead;
        }
    }
    let rows = (0..grid.len()).filter(|&f| {
        let i = grid.index_along(f, 0);
        i > 0 && i + 1 < slices
    });
    Ok((psi, rows.collect()))
}

/// Largest `c h₀ / h_A` over the grid, with `c² = K_A / |K₀|` the squared
/// propagation speed of each transverse axis.
pub fn courant_number(space: &ConfigSpace) -> Result<f64> {
    let grid = space.grid();
    let h0 = grid.axis(0).spacing();
    let mut worst: f64 = 0.0;
    for f in 0..grid.len() {
        let k0 = space.kinetic(f, 0);
        for axis in 1..grid.dim() {
            let k = space.kinetic(f, axis);
            if k0 * k >= 0.0 {
                return Err(Error::IllPosed(format!(
                    "constraint is not hyperbolic in the first axis at node {f}"
                )));
            }
            worst = worst.max((k / k0).abs().sqrt() * h0 / grid.axis(axis).spacing());
        }
    }
    Ok(worst)
}

fn check_courant(space: &ConfigSpace) -> Result<()> {
    let c = courant_number(space)?;
    if c > MARCHING_LIMIT {
        return Err(Error::Stability {
            ratio_name: "courant",
            value: c,
            limit: MARCHING_LIMIT,
        });
    }
    Ok(())
}

/// Rescale to unit `∫ μ |ψ|²` over the grid.
pub fn normalize_zero_mode(wave: &WaveState, space: &ConfigSpace) -> Result<WaveState> {
    let d: Vec<f64> = wave
        .psi
        .iter()
        .zip(space.measure())
        .map(|(z, m)| m * z.norm_sqr())
        .collect();
    let n = space.grid().integrate(&d).sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::Degenerate("cannot normalize a zero amplitude".into()));
    }
    Ok(WaveState::new(wave.psi.iter().map(|z| z / n).collect(), wave.time))
}

#[derive(Clone, Debug)]
pub struct SplitResidual {
    /// `wdw_real`: quantum Hamilton–Jacobi residual; `wdw_imag`: scaled
    /// current divergence. Both are RMS over interior, unmasked nodes.
    pub report: ResidualReport,
    /// Node-wise real part `N(½ K (∂S)² + U + Q)`.
    pub real: Vec<f64>,
    /// Node-wise imaginary part `−(ħ' N / 2ρ) ∂(ρ K ∂S)`.
    pub imag: Vec<f64>,
    pub masked: Vec<usize>,
}

/// Split a stationary amplitude into density and phase and evaluate the
/// two real equations that the constraint `Op ψ = 0` is equivalent to.
/// Their node-wise values approximate `(Op ψ)/ψ`.
pub fn madelung_split_residual(psi: &WaveState, space: &ConfigSpace) -> Result<SplitResidual> {
    let grid = space.grid();
    let c = space.constants();
    let split = ensemble_from_wave(psi, grid, c, 0)?;
    let rho = &split.state.rho;
    let s = &split.state.s;
    let real: Vec<f64> = quantum_hj(rho, s, space).iter().map(|v| c.lapse * v).collect();
    let scale = -0.5 * c.effective_hbar() * c.lapse;
    let imag: Vec<f64> = current_divergence(rho, s, space)
        .iter()
        .zip(rho)
        .map(|(d, r)| if *r > DENSITY_FLOOR { scale * d / r } else { 0.0 })
        .collect();
    let nodes: Vec<usize> = grid
        .interior_nodes()
        .into_iter()
        .filter(|&f| rho[f] > DENSITY_FLOOR)
        .collect();
    let rms = |v: &[f64]| {
        if nodes.is_empty() {
            return 0.0;
        }
        let sq: Vec<f64> = nodes.iter().map(|&f| v[f] * v[f]).collect();
        (pairwise_sum(&sq) / nodes.len() as f64).sqrt()
    };
    let mut report = ResidualReport::default();
    report.insert("wdw_real", rms(&real), nodes.len());
    report.insert("wdw_imag", rms(&imag), nodes.len());
    Ok(SplitResidual {
        report,
        real,
        imag,
        masked: split.masked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspace::{build_coupled_space, build_frw_space, PhysicalConstants};
    use crate::grid::{Axis, Grid};

    fn frw(k: i8, points: usize) -> ConfigSpace {
        build_frw_space(k, 1.0, &Axis::new("a", 0.5, 3.0, points).unwrap(), PhysicalConstants::default()).unwrap()
    }

    fn constant_space(points: usize) -> ConfigSpace {
        let grid = Grid::new(vec![Axis::new("a", 0.5, 3.0, points).unwrap()]).unwrap();
        let potential = grid.axis(0).coords().iter().map(|a| -a * a).collect();
        ConfigSpace::uniform(SpaceKind::Frw, grid, vec![-0.7], potential, PhysicalConstants::default()).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn orderings_agree_for_constant_coefficients() {
        let space = constant_space(50);
        let p = build_wdw_operator(&space, Ordering::Paper).unwrap();
        let n = build_wdw_operator(&space, Ordering::Naive).unwrap();
        assert_eq!(p.matrix, n.matrix);
    }

    #[test]
    fn orderings_differ_on_closed_universe() {
        let space = frw(1, 200);
        let p = build_wdw_operator(&space, Ordering::Paper).unwrap();
        let n = build_wdw_operator(&space, Ordering::Naive).unwrap();
        let rel = p.matrix.combine(1.0, &n.matrix, -1.0).frobenius_norm() / p.matrix.frobenius_norm();
        assert!(rel > 1e-3, "{rel}");
    }

    #[test]
    fn tsallis_order_scales_only_kinetic_block() {
        let one = build_wdw_operator(&frw(1, 40), Ordering::Paper).unwrap();
        let space2 = frw(1, 40).with_constants(PhysicalConstants::default().with_alpha(2.0)).unwrap();
        let two = build_wdw_operator(&space2, Ordering::Paper).unwrap();
        assert_eq!(two.kinetic, one.kinetic);
        assert_eq!(two.potential, one.potential);
        assert_eq!(two.matrix, one.kinetic.combine(2.0, &one.potential, 1.0));
        assert_eq!(one.matrix, one.kinetic.combine(1.0, &one.potential, 1.0));
    }

    #[test]
    fn divergence_ordering_is_symmetric() {
        let k = build_wdw_operator(&frw(1, 80), Ordering::Paper).unwrap().kinetic;
        let d = k.combine(1.0, &k.transpose(), -1.0).frobenius_norm();
        assert!(d <= 1e-12 * k.frobenius_norm(), "{d}");
        let naive = build_wdw_operator(&frw(1, 80), Ordering::Naive).unwrap().kinetic;
        assert!(naive.combine(1.0, &naive.transpose(), -1.0).frobenius_norm() > 1e-6);
    }

    #[test]
    fn lattice_spaces_are_rejected() {
        let space = crate::configspace::build_scalar_lattice_space(
            crate::configspace::LatticeSpec { sites: 1, spacing: 1.0 },
            1.0,
            &Axis::new("phi", -1.0, 1.0, 11).unwrap(),
            PhysicalConstants::default(),
        )
        .unwrap();
        assert!(matches!(build_wdw_operator(&space, Ordering::Paper), Err(Error::WrongSpace(_))));
    }

    #[test]
    fn flat_universe_zero_mode_has_constant_flux() {
        let space = frw(0, 301);
        let op = build_wdw_operator(&space, Ordering::Paper).unwrap();
        let mode = solve_wdw(&op, &Boundary::Values { left: c(1.0, 0.0), right: c(5.0, 0.0) }, 1e-10).unwrap();
        // Independent first integral: K ψ' is constant across every face.
        let grid = space.grid();
        let faces: Vec<f64> = (0..grid.len() - 1).map(|i| 1.0 / link_weight(&space, Ordering::Paper, i, 0, 1)).collect();
        let flux = 4.0 / pairwise_sum(&faces);
        let mut expected = 1.0;
        for (i, z) in mode.wave.psi.iter().enumerate() {
            assert!((z.re - expected).abs() <= 1e-8 * expected.abs().max(1.0), "node {i}: {} vs {expected}", z.re);
            assert_eq!(z.im, 0.0);
            if i + 1 < grid.len() {
                expected += flux * faces[i];
            }
        }
    }

    #[test]
    fn solution_is_linear_in_boundary_data() {
        let op = build_wdw_operator(&frw(1, 120), Ordering::Paper).unwrap();
        let b = Boundary::Values { left: c(1.0, 0.5), right: c(-0.3, 2.0) };
        let base = solve_wdw(&op, &b, 1e-10).unwrap().wave;
        let k = c(2.5, -1.0);
        let scaled = solve_wdw(&op, &Boundary::Values { left: c(1.0, 0.5) * k, right: c(-0.3, 2.0) * k }, 1e-10)
            .unwrap()
            .wave;
        for (a, b) in base.psi.iter().zip(&scaled.psi) {
            assert!((a * k - b).norm() <= 1e-12 * b.norm().max(1.0));
        }
    }

    #[test]
    fn marching_matches_two_point_solution() {
        let space = frw(1, 400);
        let op = build_wdw_operator(&space, Ordering::Paper).unwrap();
        let bvp = solve_wdw(&op, &Boundary::Values { left: c(1.0, 0.0), right: c(2.0, 0.0) }, 1e-10).unwrap().wave;
        let h = space.grid().axis(0).spacing();
        // Centred slope from the two-point solution; the marched amplitude
        // then follows it up to the starting error.
        let slope = (bvp.psi[1] - bvp.psi[0]) / h;
        let marched = solve_wdw(&op, &Boundary::Initial { value: vec![bvp.psi[0]], slope: vec![slope] }, 1e-10)
            .unwrap()
            .wave;
        let end = marched.psi.last().unwrap().re;
        assert!((end - 2.0).abs() < 0.05, "{end}");
    }

    #[test]
    fn hyperbolic_marching_respects_courant_limit() {
        let frw = build_frw_space(1, 1.0, &Axis::new("a", 1.0, 2.0, 41).unwrap(), PhysicalConstants::default()).unwrap();
        let coupled = build_coupled_space(&frw, &Axis::new("phi", -1.0, 1.0, 41).unwrap(), PhysicalConstants::default()).unwrap();
        assert!(courant_number(&coupled).unwrap() < MARCHING_LIMIT);
        let op = build_wdw_operator(&coupled, Ordering::Paper).unwrap();
        let phi = coupled.grid().axis(1).coords();
        let value: Vec<Complex64> = phi.iter().map(|p| c((-4.0 * p * p).exp(), 0.0)).collect();
        let slope = vec![c(0.0, 0.0); phi.len()];
        let mode = solve_wdw(&op, &Boundary::Initial { value, slope }, 1e-10).unwrap();
        assert!(mode.residual < 1e-12);
        assert!(matches!(
            solve_wdw(&op, &Boundary::Values { left: c(1.0, 0.0), right: c(1.0, 0.0) }, 1e-10),
            Err(Error::IllPosed(_))
        ));
        let fine_phi = build_coupled_space(&frw, &Axis::new("phi", -1.0, 1.0, 401).unwrap(), PhysicalConstants::default()).unwrap();
        let op = build_wdw_operator(&fine_phi, Ordering::Paper).unwrap();
        let value = vec![c(1.0, 0.0); 401];
        let slope = vec![c(0.0, 0.0); 401];
        assert!(matches!(
            solve_wdw(&op, &Boundary::Initial { value, slope }, 1e-10),
            Err(Error::Stability { .. })
        ));
    }

    #[test]
    fn real_positive_amplitude_carries_no_current() {
        let space = frw(1, 101);
        let psi: Vec<Complex64> = space.grid().axis(0).coords().iter().map(|a| c((-a * a).exp(), 0.0)).collect();
        let split = madelung_split_residual(&WaveState::new(psi, 0.0), &space).unwrap();
        assert_eq!(split.report.get("wdw_imag"), Some(0.0));
        assert!(split.report.get("wdw_real").unwrap() > 0.0);
    }

    #[test]
    fn split_ignores_global_phase() {
        let space = frw(1, 101);
        let op = build_wdw_operator(&space, Ordering::Paper).unwrap();
        let mode = solve_wdw(&op, &Boundary::Values { left: c(1.0, 0.0), right: c(0.0, 1.0) }, 1e-10).unwrap().wave;
        let base = madelung_split_residual(&mode, &space).unwrap().report;
        let turned = WaveState::new(mode.psi.iter().map(|z| z * Complex64::from_polar(1.0, 0.7)).collect(), 0.0);
        let other = madelung_split_residual(&turned, &space).unwrap().report;
        for key in ["wdw_real", "wdw_imag"] {
            let (a, b) = (base.get(key).unwrap(), other.get(key).unwrap());
            assert!((a - b).abs() <= 1e-9 * a.max(1e-12), "{key}: {a} vs {b}");
        }
    }

    #[test]
    fn split_reproduces_operator_ratio() {
        // For any smooth amplitude, the two real equations agree with
        // (Op ψ)/ψ up to second-order stencil differences.
        let gap = |points: usize| {
            let space = frw(1, points);
            let op = build_wdw_operator(&space, Ordering::Paper).unwrap();
            let psi: Vec<Complex64> = space
                .grid()
                .axis(0)
                .coords()
                .iter()
                .map(|a| Complex64::from_polar((-(a - 1.5).powi(2)).exp(), 0.8 * a * a))
                .collect();
            let ratio = op.local_ratio(&psi);
            let split = madelung_split_residual(&WaveState::new(psi, 0.0), &space).unwrap();
            space
                .grid()
                .interior_nodes()
                .into_iter()
                .map(|f| (ratio[f].re - split.real[f]).abs().max((ratio[f].im - split.imag[f]).abs()))
                .fold(0.0, f64::max)
        };
        let (g1, g2) = (gap(101), gap(201));
        assert!(g1 / g2 > 3.5, "{g1} {g2}");
    }

    #[test]
    fn coo_export_lists_every_entry() {
        let op = build_wdw_operator(&frw(1, 10), Ordering::Naive).unwrap();
        let mut out = Vec::new();
        op.write_coo(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[2], format!("10 10 {}", op.matrix.nnz()));
        assert_eq!(lines.len(), 3 + op.matrix.nnz());
    }
}
