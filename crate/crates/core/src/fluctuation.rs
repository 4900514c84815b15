//! Gaussian fluctuation kernels, seeded sampling, and Monte Carlo checks of
//! the covariance and smeared uncertainty identities.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::configspace::{dewitt_supermetric, ConfigSpace, PhysicalConstants, SpaceModel};
use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;
use crate::rng::par_blocks;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sector {
    /// Lattice scalar field, one variable per site.
    Scalar,
    /// Trace-free metric fluctuations at a fixed spatial metric.
    GravityTraceless,
    /// Minisuperspace coordinates with the kinetic magnitude frozen at a point.
    Conformal,
}

/// Quadratic form `Ω̄` of the Gaussian fluctuation law and its inverse.
#[derive(Clone, Debug, PartialEq)]
pub struct FluctuationKernel {
    omega_bar: Option<DMatrix<f64>>,
    covariance: DMatrix<f64>,
    /// Maps standard normals to fluctuations: `w = factor · z`.
    factor: DMatrix<f64>,
    dt: f64,
    constants: PhysicalConstants,
    sector: Sector,
    /// Spatial cell weight used when smearing against test functions.
    site_volume: f64,
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    Ok(())
}

impl FluctuationKernel {
    fn from_omega(omega: DMatrix<f64>, dt: f64, constants: PhysicalConstants, sector: Sector, site_volume: f64) -> Result<Self> {
        let sym = (&omega + omega.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let min = eig.eigenvalues.min();
        if min <= 0.0 || !min.is_finite() {
            return Err(Error::NotPositiveDefinite(format!(
                "fluctuation form in the {sector:?} sector has eigenvalue {min:.3e}"
            )));
        }
        let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
        let factor = &eig.eigenvectors * inv_sqrt;
        let covariance = &factor * factor.transpose();
        Ok(FluctuationKernel {
            omega_bar: Some(sym),
            covariance,
            factor,
            dt,
            constants,
            sector,
            site_volume,
        })
    }

    /// Kernel defined directly by its covariance, which may be singular.
    /// The quadratic form is only kept when the covariance is invertible.
    pub fn from_covariance(
        covariance: DMatrix<f64>,
        dt: f64,
        constants: PhysicalConstants,
        sector: Sector,
        site_volume: f64,
    ) -> Result<Self> {
        if !covariance.is_square() {
            return Err(Error::ShapeMismatch {
                expected: covariance.nrows(),
                got: covariance.ncols(),
            });
        }
        let sym = (&covariance + covariance.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        if eig.eigenvalues.iter().any(|&l| l < -1e-14 * sym.amax()) {
            return Err(Error::NotPositiveDefinite("covariance".into()));
        }
        let sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
        let factor = &eig.eigenvectors * sqrt;
        let omega_bar = if eig.eigenvalues.min() > 0.0 {
            sym.clone().try_inverse()
        } else {
            None
        };
        Ok(FluctuationKernel {
            omega_bar,
            covariance: sym,
            factor,
            dt,
            constants,
            sector,
            site_volume,
        })
    }

    pub fn omega_bar(&self) -> Option<&DMatrix<f64>> {
        self.omega_bar.as_ref()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn constants(&self) -> &PhysicalConstants {
        &self.constants
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    pub fn site_volume(&self) -> f64 {
        self.site_volume
    }

    /// Largest entry of `C·Ω̄ − I`, or `None` for singular kernels.
    pub fn inverse_residual(&self) -> Option<f64> {
        let omega = self.omega_bar.as_ref()?;
        let prod = &self.covariance * omega;
        Some((prod - DMatrix::identity(self.dim(), self.dim())).amax())
    }

    /// `w = factor · z` for a vector of standard normals.
    pub fn map_normals(&self, z: &[f64], w: &mut [f64]) {
        let d = self.dim();
        for r in 0..d {
            w[r] = (0..d).map(|c| self.factor[(r, c)] * z[c]).sum();
        }
    }

    pub fn id(&self) -> String {
        format!("{:?}/d{}/dt{:e}", self.sector, self.dim(), self.dt)
    }
}

/// Kernel for the space's natural sector. Minisuperspace kernels freeze the
/// kinetic magnitude at the centre of the grid; use
/// [`build_fluctuation_kernel_at`] to choose the point.
pub fn build_fluctuation_kernel(space: &ConfigSpace, dt: f64, constants: PhysicalConstants) -> Result<FluctuationKernel> {
    let centre: Vec<f64> = space.grid().axes().iter().map(|a| 0.5 * (a.min + a.max)).collect();
    build_fluctuation_kernel_at(space, &centre, dt, constants)
}

pub fn build_fluctuation_kernel_at(
    space: &ConfigSpace,
    point: &[f64],
    dt: f64,
    constants: PhysicalConstants,
) -> Result<FluctuationKernel> {
    check_dt(dt)?;
    constants.validate()?;
    if point.len() != space.dim() {
        return Err(Error::ShapeMismatch {
            expected: space.dim(),
            got: point.len(),
        });
    }
    match space.model() {
        SpaceModel::ScalarLattice { lattice, .. } => {
            let d = lattice.sites;
            let omega = DMatrix::identity(d, d) * (2.0 * lattice.spacing / (constants.hbar * dt));
            FluctuationKernel::from_omega(omega, dt, constants, Sector::Scalar, lattice.spacing)
        }
        _ => {
            let k = space.kinetic_at(point);
            let diag = DVector::from_iterator(k.len(), k.iter().map(|g| 2.0 / (constants.hbar * dt * g.abs())));
            FluctuationKernel::from_omega(DMatrix::from_diagonal(&diag), dt, constants, Sector::Conformal, 1.0)
        }
    }
}

/// Frobenius-orthonormal basis of symmetric 3×3 matrices.
fn symmetric_basis() -> Vec<[[f64; 3]; 3]> {
    let mut basis = Vec::with_capacity(6);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..3 {
        for j in i..3 {
            let mut e = [[0.0; 3]; 3];
            if i == j {
                e[i][i] = 1.0;
            } else {
                e[i][j] = r;
                e[j][i] = r;
            }
            basis.push(e);
        }
    }
    basis
}

/// Supermetric form `G_ijkl a^ij b^kl` restricted to the trace-free
/// subspace `tr(h w) = 0`, in an orthonormal coordinate basis of that
/// subspace. Returns the 5×5 form and the 6×5 embedding.
pub fn traceless_supermetric(h: &[[f64; 3]; 3]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let sm = dewitt_supermetric(h)?;
    let basis = symmetric_basis();
    let full: DMatrix<f64> = DMatrix::from_fn(6, 6, |a, b| sm.lower_form(&basis[a], &basis[b]));
    let trace: DMatrix<f64> = DMatrix::from_fn(1, 6, |_, a| (0..3).map(|i| (0..3).map(|j| h[i][j] * basis[a][j][i]).sum::<f64>()).sum());
    // Null space of the trace functional via the eigenvectors of tᵀt.
    let eig = SymmetricEigen::new(trace.transpose() * &trace);
    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&x, &y| f64::total_cmp(&eig.eigenvalues[x], &eig.eigenvalues[y]));
    let embed: DMatrix<f64> = DMatrix::from_fn(6, 5, |r, c| eig.eigenvectors[(r, order[c])]);
    let form = embed.transpose() * full * &embed;
    Ok(((&form + form.transpose()) * 0.5, embed))
}

/// Trace-free metric fluctuation kernel at the spatial metric `h`:
/// `Ω̄ = √h · G_T / (16πG N ħ Δt)`.
pub fn build_gravity_kernel(h: &[[f64; 3]; 3], dt: f64, constants: PhysicalConstants) -> Result<FluctuationKernel> {
    check_dt(dt)?;
    constants.validate()?;
    if constants.grav <= 0.0 {
        return Err(Error::param("grav", "gravity kernels need G > 0"));
    }
    let (form, _) = traceless_supermetric(h)?;
    let det = nalgebra::Matrix3::from_fn(|i, j| h[i][j]).determinant();
    let scale = det.sqrt() / (16.0 * PI * constants.grav * constants.lapse * constants.hbar * dt);
    FluctuationKernel::from_omega(form * scale, dt, constants, Sector::GravityTraceless, 1.0)
        .map_err(|e| Error::NotPositiveDefinite(format!("trace-free sector should be definite for SPD metrics: {e}")))
}

/// Rows of fluctuation vectors drawn from one kernel.
#[derive(Clone, Debug)]
pub struct SampleBatch {
    /// Row-major `n × dim`.
    pub samples: Vec<f64>,
    pub dim: usize,
    pub seed: u64,
    pub kernel: FluctuationKernel,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.samples.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn kernel_id(&self) -> String {
        self.kernel.id()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (0..self.dim).map(|k| format!("w{k}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.len() {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub fn sample(kernel: &FluctuationKernel, n_samples: usize, seed: u64) -> Result<SampleBatch> {
    if n_samples == 0 {
        return Err(Error::param("n_samples", "must be at least 1"));
    }
    let d = kernel.dim();
    let rows = par_blocks(n_samples, seed, |rng, range| {
        let mut out = vec![0.0; range.len() * d];
        let mut z = vec![0.0; d];
        for row in out.chunks_mut(d) {
            for v in z.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
            kernel.map_normals(&z, row);
        }
        out
    });
    Ok(SampleBatch {
        samples: rows.concat(),
        dim: d,
        seed,
        kernel: kernel.clone(),
    })
}

/// Mean and standard error of per-sample values, with block-ordered
/// pairwise reductions.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = pairwise_sum(values) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct CovarianceReport {
    pub estimated_cov: Vec<Vec<f64>>,
    pub theoretical_cov: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    /// Largest `|Ĉ_ij − C_ij| / √(C_ii C_jj)`.
    pub max_rel_err: f64,
    /// Largest deviation in units of its standard error.
    pub max_z: f64,
    /// False when any entry deviates by more than five standard errors.
    pub consistent: bool,
}

pub fn covariance_check(batch: &SampleBatch) -> Result<CovarianceReport> {
    if batch.is_empty() {
        return Err(Error::param("batch", "empty sample batch"));
    }
    let d = batch.dim;
    let c = batch.kernel.covariance();
    let mut est = vec![vec![0.0; d]; d];
    let mut se = vec![vec![0.0; d]; d];
    let mut max_rel: f64 = 0.0;
    let mut max_z: f64 = 0.0;
    let mut consistent = true;
    let n = batch.len();
    let mut prod = vec![0.0; n];
    for i in 0..d {
        for j in i..d {
            for (s, p) in prod.iter_mut().enumerate() {
                let row = batch.row(s);
                *p = row[i] * row[j];
            }
            let (m, e) = mean_stderr(&prod);
            est[i][j] = m;
            est[j][i] = m;
            se[i][j] = e;
            se[j][i] = e;
            let dev = (m - c[(i, j)]).abs();
            let scale = (c[(i, i)] * c[(j, j)]).sqrt();
            if scale > 0.0 {
                max_rel = max_rel.max(dev / scale);
            } else if dev > 0.0 {
                max_rel = f64::INFINITY;
            }
            if dev > 0.0 {
                let z = if e > 0.0 { dev / e } else { f64::INFINITY };
                max_z = max_z.max(z);
                if z > 5.0 {
                    consistent = false;
                }
            }
        }
    }
    let theo = (0..d).map(|i| (0..d).map(|j| c[(i, j)]).collect()).collect();
    Ok(CovarianceReport {
        estimated_cov: est,
        theoretical_cov: theo,
        stderr: se,
        max_rel_err: max_rel,
        max_z,
        consistent,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct UncertaintyReport {
    pub cross_cov_estimate: f64,
    pub stderr: f64,
    /// `(ħ/2)⟨f|g⟩`.
    pub bound: f64,
    /// `(estimate − bound) / stderr`; zero when both vanish.
    pub margin: f64,
}

/// Smeared cross-covariance `⟨Δq(f) Δπ(g)⟩`, with the momentum
/// fluctuation `Δp = (ħ/2) Ω̄ w` rebuilt from the same samples.
pub fn uncertainty_check(batch: &SampleBatch, f: &[f64], g: &[f64]) -> Result<UncertaintyReport> {
    let d = batch.dim;
    for v in [f, g] {
        if v.len() != d {
            return Err(Error::ShapeMismatch {
                expected: d,
                got: v.len(),
            });
        }
        if v.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::param("test function", "weights must be non-negative"));
        }
    }
    let kernel = &batch.kernel;
    let omega = kernel
        .omega_bar()
        .ok_or_else(|| Error::Degenerate("momentum map needs an invertible kernel".into()))?;
    let hbar = kernel.constants().hbar;
    let vol = kernel.site_volume();
    // Δπ(g) = gᵀ (ħ/2) Ω̄ w, so precompute the row vector.
    let gw: Vec<f64> = (0..d).map(|c| 0.5 * hbar * (0..d).map(|r| g[r] * omega[(r, c)]).sum::<f64>()).collect();
    let prods: Vec<f64> = (0..batch.len())
        .map(|s| {
            let w = batch.row(s);
            let dq: f64 = vol * f.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            let dp: f64 = gw.iter().zip(w).map(|(a, b)| a * b).sum();
            dq * dp
        })
        .collect();
    let (m, e) = mean_stderr(&prods);
    let bound = 0.5 * hbar * vol * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
    let margin = if e > 0.0 {
        (m - bound) / e
    } else if m == bound {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(UncertaintyReport {
        cross_cov_estimate: m,
        stderr: e,
        bound,
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspace::{build_scalar_lattice_space, LatticeSpec};
    use crate::grid::Axis;
    use proptest::prelude::*;

    fn scalar(n: usize, dt: f64) -> FluctuationKernel {
        let c = PhysicalConstants::default();
        let space = build_scalar_lattice_space(
            LatticeSpec { sites: n, spacing: 1.0 },
            1.0,
            &Axis::new("phi", -3.0, 3.0, 5).unwrap(),
            c,
        )
        .unwrap();
        build_fluctuation_kernel(&space, dt, c).unwrap()
    }

    #[test]
    fn single_site_variance() {
        let k = scalar(1, 1e-3);
        assert!((k.covariance()[(0, 0)] - 5e-4).abs() < 1e-18);
        assert!(k.inverse_residual().unwrap() < 1e-10);
    }

    #[test]
    fn two_sites_are_uncorrelated() {
        let k = scalar(2, 1e-3);
        assert_eq!(k.covariance()[(0, 1)], 0.0);
        assert_eq!(k.covariance()[(1, 0)], 0.0);
    }

    #[test]
    fn rejects_nonpositive_dt() {
        let c = PhysicalConstants::default();
        let space = build_scalar_lattice_space(
            LatticeSpec { sites: 1, spacing: 1.0 },
            1.0,
            &Axis::new("phi", -3.0, 3.0, 5).unwrap(),
            c,
        )
        .unwrap();
        assert!(build_fluctuation_kernel(&space, 0.0, c).is_err());
        assert!(build_fluctuation_kernel(&space, -1.0, c).is_err());
    }

    #[test]
    fn gravity_identity_metric_is_isotropic() {
        let c = PhysicalConstants::default();
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let dt = 1e-3;
        let k = build_gravity_kernel(&id, dt, c).unwrap();
        let expect = 16.0 * PI * dt;
        let diff = k.covariance() - DMatrix::identity(5, 5) * expect;
        assert!(diff.amax() < 1e-14 * expect, "{}", k.covariance());
    }

    #[test]
    fn sampling_is_deterministic() {
        let k = scalar(2, 1e-3);
        let a = sample(&k, 10_000, 3).unwrap();
        let b = sample(&k, 10_000, 3).unwrap();
        assert_eq!(a.samples, b.samples);
        assert!(sample(&k, 0, 3).is_err());
    }

    #[test]
    fn zero_batch_is_flagged() {
        let k = scalar(1, 1e-3);
        let mut batch = sample(&k, 100, 1).unwrap();
        batch.samples.iter_mut().for_each(|v| *v = 0.0);
        let rep = covariance_check(&batch).unwrap();
        assert_eq!(rep.estimated_cov[0][0], 0.0);
        assert!(!rep.consistent);
    }

    #[test]
    fn degenerate_kernel_samples_zero() {
        let k = FluctuationKernel::from_covariance(
            DMatrix::zeros(1, 1),
            0.0,
            PhysicalConstants::default(),
            Sector::Scalar,
            1.0,
        )
        .unwrap();
        assert!(k.omega_bar().is_none());
        let batch = sample(&k, 10, 0).unwrap();
        assert!(batch.samples.iter().all(|&v| v == 0.0));
    }

    proptest! {
        #[test]
        fn doubling_dt_scales_kernel(dt in 1e-5f64..1e-1, n in 1usize..4) {
            let a = scalar(n, dt);
            let b = scalar(n, 2.0 * dt);
            let oa = a.omega_bar().unwrap();
            let ob = b.omega_bar().unwrap();
            for i in 0..n {
                prop_assert!((ob[(i, i)] * 2.0 - oa[(i, i)]).abs() <= 1e-12 * oa[(i, i)]);
                prop_assert!((b.covariance()[(i, i)] - 2.0 * a.covariance()[(i, i)]).abs() <= 1e-12 * b.covariance()[(i, i)]);
            }
        }

        #[test]
        fn gravity_covariance_inverts_form(e in prop::array::uniform6(-0.5f64..0.5)) {
            let h = [[1.0 + e[0].abs(), e[1], e[2]], [e[1], 1.2 + e[3].abs(), e[4]], [e[2], e[4], 0.9 + e[5].abs()]];
            if let Ok(k) = build_gravity_kernel(&h, 1e-3, PhysicalConstants::default()) {
                prop_assert!(k.inverse_residual().unwrap() < 1e-10);
            }
        }
    }
}
