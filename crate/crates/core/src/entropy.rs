//! Relative-entropy functionals between a density and its randomly shifted
//! copy, and the Fisher functional that controls their small-step limit.

use serde::Serialize;

use crate::configspace::ConfigSpace;
use crate::error::{Error, Result};
use crate::fluctuation::{mean_stderr, FluctuationKernel};
use crate::grid::Grid;
use crate::rng::par_blocks;
use rand_distr::{Distribution, StandardNormal};

/// Densities below this value are treated as empty.
pub const DENSITY_FLOOR: f64 = 1e-30;

const NORMALIZATION_TOL: f64 = 1e-8;

/// Number of covariance standard deviations the grid must extend past the
/// support of the density.
pub const MARGIN_SIGMAS: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DivergenceEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
    /// Tsallis order; 1 for Kullback-Leibler.
    pub alpha: f64,
}

pub(crate) fn check_normalized(grid: &Grid, rho: &[f64]) -> Result<()> {
    if rho.len() != grid.len() {
        return Err(Error::ShapeMismatch {
            expected: grid.len(),
            got: rho.len(),
        });
    }
    if rho.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
        return Err(Error::param("rho", "density must be finite and non-negative"));
    }
    let integral = grid.integrate(rho);
    if (integral - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized { integral });
    }
    Ok(())
}

/// `Σ_A ∫ (1/ρ) K_A (∂_A ρ)²` on the grid, with the space's kinetic
/// coefficients as weights. Nodes below the density floor are skipped.
pub fn fisher_functional(rho: &[f64], space: &ConfigSpace) -> Result<f64> {
    let grid = space.grid();
    check_normalized(grid, rho)?;
    let mut terms = vec![0.0; grid.len()];
    for axis in 0..grid.dim() {
        let d = grid.derivative(rho, axis);
        for (f, t) in terms.iter_mut().enumerate() {
            if rho[f] > DENSITY_FLOOR {
                *t += space.kinetic(f, axis) * d[f] * d[f] / rho[f];
            }
        }
    }
    Ok(grid.integrate(&terms))
}

struct Shifted<'a> {
    grid: &'a Grid,
    rho: &'a [f64],
    support: Vec<usize>,
    coords: Vec<f64>,
    log_rho: Vec<f64>,
}

impl<'a> Shifted<'a> {
    fn new(grid: &'a Grid, rho: &'a [f64], kernel: &FluctuationKernel) -> Result<Self> {
        check_normalized(grid, rho)?;
        if kernel.dim() != grid.dim() {
            return Err(Error::ShapeMismatch {
                expected: grid.dim(),
                got: kernel.dim(),
            });
        }
        let support: Vec<usize> = (0..grid.len()).filter(|&f| rho[f] > DENSITY_FLOOR).collect();
        let d = grid.dim();
        let mut coords = Vec::with_capacity(support.len() * d);
        for &f in &support {
            coords.extend(grid.point(f));
        }
        let sigma = (0..d)
            .map(|k| kernel.covariance()[(k, k)])
            .fold(0.0f64, f64::max)
            .sqrt();
        let required = MARGIN_SIGMAS * sigma;
        if required > 0.0 {
            let mut margin = f64::INFINITY;
            for (k, axis) in grid.axes().iter().enumerate() {
                if axis.periodic {
                    continue;
                }
                for s in 0..support.len() {
                    let x = coords[s * d + k];
                    margin = margin.min(x - axis.min).min(axis.max - x);
                }
            }
            if margin < required {
                return Err(Error::GridMargin { margin, required });
            }
        }
        let log_rho = support.iter().map(|&f| rho[f].ln()).collect();
        Ok(Shifted {
            grid,
            rho,
            support,
            coords,
            log_rho,
        })
    }

    /// `vol Σ ρ(q) φ(ln ρ(q) − ln ρ(q+w))` over the support.
    fn integral(&self, w: &[f64], phi: &impl Fn(f64) -> Result<f64>) -> Result<f64> {
        if w.iter().all(|&x| x == 0.0) {
            return Ok(0.0);
        }
        let d = self.grid.dim();
        let mut point = vec![0.0; d];
        let mut acc = vec![0.0; self.support.len()];
        for (s, &f) in self.support.iter().enumerate() {
            for k in 0..d {
                point[k] = self.coords[s * d + k] + w[k];
            }
            let shifted = match self.grid.interpolate_cubic(self.rho, &point) {
                Some(v) if v > DENSITY_FLOOR => v,
                _ => continue,
            };
            let x = phi(self.log_rho[s] - shifted.ln())?;
            if !x.is_finite() {
                return Err(Error::Overflow("relative entropy integrand"));
            }
            acc[s] = self.rho[f] * x;
        }
        Ok(self.grid.integrate_subset(&acc))
    }
}

fn estimate<F>(
    grid: &Grid,
    rho: &[f64],
    kernel: &FluctuationKernel,
    n: usize,
    seed: u64,
    alpha: f64,
    phi: F,
) -> Result<DivergenceEstimate>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if n == 0 {
        return Err(Error::param("n", "need at least one sample"));
    }
    let shifted = Shifted::new(grid, rho, kernel)?;
    let d = kernel.dim();
    let blocks = par_blocks(n, seed, |rng, range| -> Result<Vec<f64>> {
        let mut z = vec![0.0; d];
        let mut w = vec![0.0; d];
        let mut out = Vec::with_capacity(range.len());
        for _ in range {
            for v in z.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
            kernel.map_normals(&z, &mut w);
            out.push(shifted.integral(&w, &phi)?);
        }
        Ok(out)
    });
    let mut values = Vec::with_capacity(n);
    for b in blocks {
        values.extend(b?);
    }
    let (value, stderr) = mean_stderr(&values);
    Ok(DivergenceEstimate {
        value,
        stderr,
        n_samples: n,
        alpha,
    })
}

/// Mean Kullback-Leibler divergence `⟨D(ρ(q) ‖ ρ(q+w))⟩_w` over kernel draws.
pub fn kl_mc(grid: &Grid, rho: &[f64], kernel: &FluctuationKernel, n: usize, seed: u64) -> Result<DivergenceEstimate> {
    estimate(grid, rho, kernel, n, seed, 1.0, Ok)
}

/// Largest exponent accepted before `exp` is considered to overflow.
const EXP_LIMIT: f64 = 700.0;

/// Mean Tsallis divergence of order `alpha` over kernel draws, computed as
/// `Σ ρ expm1((α−1) ln(ρ/ρ_w)) / (α−1)` to avoid cancellation near α = 1.
pub fn tsallis_mc(
    grid: &Grid,
    rho: &[f64],
    alpha: f64,
    kernel: &FluctuationKernel,
    n: usize,
    seed: u64,
) -> Result<DivergenceEstimate> {
    if !(alpha > 0.0 && alpha.is_finite()) || alpha == 1.0 {
        return Err(Error::param("alpha", format!("must be positive and not 1, got {alpha}")));
    }
    let am1 = alpha - 1.0;
    estimate(grid, rho, kernel, n, seed, alpha, move |x| {
        let e = am1 * x;
        if e > EXP_LIMIT {
            return Err(Error::Overflow("Tsallis integrand"));
        }
        Ok(e.exp_m1() / am1)
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitReport {
    pub dts: Vec<f64>,
    pub estimates: Vec<DivergenceEstimate>,
    pub slope: f64,
    pub intercept: f64,
    /// `(ħ/4)|F|` with `F` the Fisher functional.
    pub fisher_prediction: f64,
    /// RMS deviation of the points from the fitted line.
    pub fit_residual: f64,
}

/// Ordinary least squares `y = slope·x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 || x.len() != y.len() {
        return Err(Error::Degenerate("a line fit needs at least two points".into()));
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Degenerate("all abscissae are equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Fit the mean divergence against the step size for a family of kernels
/// and compare the slope with the Fisher prediction.
pub fn small_dt_limit_report(
    rho: &[f64],
    space: &ConfigSpace,
    kernels: &[FluctuationKernel],
    n: usize,
    seed: u64,
) -> Result<LimitReport> {
    let dts: Vec<f64> = kernels.iter().map(FluctuationKernel::dt).collect();
    let lo = dts.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = dts.iter().cloned().fold(0.0, f64::max);
    if kernels.len() < 2 || !(hi > lo) {
        return Err(Error::Degenerate("step sizes must differ".into()));
    }
    if hi < 10.0 * lo {
        return Err(Error::Degenerate(format!("step sizes span less than a decade: [{lo:e}, {hi:e}]")));
    }
    let hbar = kernels[0].constants().hbar;
    let estimates = kernels
        .iter()
        .map(|k| kl_mc(space.grid(), rho, k, n, seed))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = estimates.iter().map(|e| e.value).collect();
    let (slope, intercept) = linear_fit(&dts, &values)?;
    let fit_residual = (dts
        .iter()
        .zip(&values)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        / dts.len() as f64)
        .sqrt();
    let fisher = fisher_functional(rho, space)?;
    Ok(LimitReport {
        dts,
        estimates,
        slope,
        intercept,
        fisher_prediction: 0.25 * hbar * fisher.abs(),
        fit_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspace::{build_scalar_lattice_space, LatticeSpec, PhysicalConstants};
    use crate::fluctuation::{build_fluctuation_kernel, Sector};
    use crate::grid::Axis;

    fn gaussian_space(s: f64, half: f64, points: usize) -> (ConfigSpace, Vec<f64>) {
        let space = build_scalar_lattice_space(
            LatticeSpec { sites: 1, spacing: 1.0 },
            1.0,
            &Axis::new("phi", -half, half, points).unwrap(),
            PhysicalConstants::default(),
        )
        .unwrap();
        let mut rho: Vec<f64> = space
            .grid()
            .axis(0)
            .coords()
            .iter()
            .map(|x| (-x * x / (2.0 * s * s)).exp())
            .collect();
        let z = space.grid().integrate(&rho);
        rho.iter_mut().for_each(|r| *r /= z);
        (space, rho)
    }

    #[test]
    fn fisher_of_gaussians() {
        for (s, expect) in [(1.0, 1.0), (2.0, 0.25)] {
            let (space, rho) = gaussian_space(s, 14.0 * s, 2801);
            let f = fisher_functional(&rho, &space).unwrap();
            assert!((f - expect).abs() < 1e-5 * expect, "s={s} F={f}");
        }
    }

    #[test]
    fn fisher_of_uniform_periodic_density_is_zero() {
        let space = crate::configspace::ConfigSpace::uniform(
            crate::configspace::SpaceKind::ScalarLattice,
            Grid::new(vec![Axis::periodic("x", 0.0, 2.0, 16).unwrap()]).unwrap(),
            vec![1.0],
            vec![0.0; 16],
            PhysicalConstants::default(),
        )
        .unwrap();
        let rho = vec![0.5; 16];
        assert_eq!(fisher_functional(&rho, &space).unwrap(), 0.0);
    }

    #[test]
    fn rejects_unnormalized_density() {
        let (space, mut rho) = gaussian_space(1.0, 10.0, 201);
        rho[100] += 1e-3;
        assert!(matches!(fisher_functional(&rho, &space), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn degenerate_kernel_gives_zero() {
        let (space, rho) = gaussian_space(1.0, 14.0, 561);
        let k = FluctuationKernel::from_covariance(
            nalgebra::DMatrix::zeros(1, 1),
            0.0,
            PhysicalConstants::default(),
            Sector::Scalar,
            1.0,
        )
        .unwrap();
        let est = kl_mc(space.grid(), &rho, &k, 1000, 1).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn margin_violation_is_reported() {
        let (space, rho) = gaussian_space(1.0, 12.0, 481);
        let k = build_fluctuation_kernel(&space, 1.0, PhysicalConstants::default()).unwrap();
        assert!(matches!(kl_mc(space.grid(), &rho, &k, 10, 1), Err(Error::GridMargin { .. })));
    }

    #[test]
    fn kl_matches_shifted_gaussian() {
        let (space, rho) = gaussian_space(1.0, 14.0, 561);
        let k = build_fluctuation_kernel(&space, 1e-3, PhysicalConstants::default()).unwrap();
        let est = kl_mc(space.grid(), &rho, &k, 20_000, 5).unwrap();
        assert!((est.value - 2.5e-4).abs() < 0.03 * 2.5e-4, "{est:?}");
        assert!(est.value > -3.0 * est.stderr);
    }

    #[test]
    fn tsallis_rejects_unit_order() {
        let (space, rho) = gaussian_space(1.0, 14.0, 561);
        let k = build_fluctuation_kernel(&space, 1e-3, PhysicalConstants::default()).unwrap();
        assert!(tsallis_mc(space.grid(), &rho, 1.0, &k, 10, 1).is_err());
    }

    #[test]
    fn fit_needs_distinct_steps() {
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_err());
        let (m, b) = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((m - 2.0).abs() < 1e-15 && (b - 1.0).abs() < 1e-15);
    }
}
