//! Python bindings for a small slice of the toolkit: Gibbs minimization,
//! fluctuation sampling, supermetric checks, ground states and zero modes.

use entroq::fluctuation::{build_fluctuation_kernel, covariance_check, sample};
use entroq::madelung::{ground_state, KineticStencil};
use entroq::wdw::{build_wdw_operator, solve_wdw, Boundary, Ordering};
use entroq::{
    build_frw_space, build_scalar_lattice_space, dewitt_supermetric, Axis, ConfigSpace, LatticeSpec,
    PhysicalConstants,
};
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

create_exception!(entroq_py, EntroqError, PyValueError);

fn lift<T>(r: entroq::Result<T>) -> PyResult<T> {
    r.map_err(|e| EntroqError::new_err(e.to_string()))
}

fn constants(hbar: f64, grav: f64) -> PhysicalConstants {
    PhysicalConstants {
        hbar,
        grav,
        ..PhysicalConstants::default()
    }
}

fn lattice(sites: usize, spacing: f64, mass: f64, field: (f64, f64, usize), hbar: f64) -> PyResult<ConfigSpace> {
    let axis = lift(Axis::new("phi", field.0, field.1, field.2))?;
    lift(build_scalar_lattice_space(
        LatticeSpec { sites, spacing },
        mass,
        &axis,
        constants(hbar, 1.0),
    ))
}

/// Minimize `Σ p E + (ħ/2) Σ p ln(p/σ)` over the simplex.
///
/// Returns `(p, kkt_residual, iterations)`. A missing prior is uniform.
#[pyfunction]
#[pyo3(signature = (energy, hbar=1.0, prior=None, tol=1e-12, max_iter=100_000))]
fn gibbs_minimize(
    energy: Vec<f64>,
    hbar: f64,
    prior: Option<Vec<f64>>,
    tol: f64,
    max_iter: usize,
) -> PyResult<(Vec<f64>, f64, usize)> {
    let prior = prior.unwrap_or_else(|| vec![1.0; energy.len()]);
    let s = lift(entroq::variational::gibbs_minimize(&energy, hbar, &prior, tol, max_iter))?;
    Ok((s.p, s.kkt_residual, s.iterations))
}

/// Largest deviation of the supermetric contraction from the identity on
/// symmetric tensors, at the spatial metric `h`.
#[pyfunction]
fn dewitt_identity_residual(h: [[f64; 3]; 3]) -> PyResult<f64> {
    Ok(lift(dewitt_supermetric(&h))?.identity_residual())
}

/// Sample lattice field fluctuations over one step and compare the sample
/// covariance with the kernel's.
///
/// Returns `(estimated, theoretical, max_rel_err)`.
#[pyfunction]
#[pyo3(signature = (sites, dt, samples, seed, spacing=1.0, mass=1.0, hbar=1.0))]
fn fluctuation_covariance(
    sites: usize,
    dt: f64,
    samples: usize,
    seed: u64,
    spacing: f64,
    mass: f64,
    hbar: f64,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>, f64)> {
    let space = lattice(sites, spacing, mass, (-5.0, 5.0, 3), hbar)?;
    let kernel = lift(build_fluctuation_kernel(&space, dt, *space.constants()))?;
    let batch = lift(sample(&kernel, samples, seed))?;
    let r = lift(covariance_check(&batch))?;
    Ok((r.estimated_cov, r.theoretical_cov, r.max_rel_err))
}

/// Lowest energy of a single-site field with the given mass on `points`
/// nodes of `[-half_width, half_width]`.
#[pyfunction]
#[pyo3(signature = (mass=1.0, half_width=8.0, points=161, hbar=1.0, tol=1e-10))]
fn oscillator_ground_energy(mass: f64, half_width: f64, points: usize, hbar: f64, tol: f64) -> PyResult<f64> {
    let space = lattice(1, 1.0, mass, (-half_width, half_width, points), hbar)?;
    Ok(lift(ground_state(&space, tol, KineticStencil::Sinc))?.energy)
}

/// Zero mode of the closed, flat or open minisuperspace constraint with fixed
/// end values. Returns `(a, psi, residual)`.
#[pyfunction]
#[pyo3(signature = (curvature, a_min, a_max, points, left, right, grav=1.0, tol=1e-10))]
#[allow(clippy::too_many_arguments)]
fn frw_zero_mode(
    curvature: i8,
    a_min: f64,
    a_max: f64,
    points: usize,
    left: Complex64,
    right: Complex64,
    grav: f64,
    tol: f64,
) -> PyResult<(Vec<f64>, Vec<Complex64>, f64)> {
    let axis = lift(Axis::new("a", a_min, a_max, points))?;
    let space = lift(build_frw_space(curvature, 1.0, &axis, constants(1.0, grav)))?;
    let op = lift(build_wdw_operator(&space, Ordering::Paper))?;
    let mode = lift(solve_wdw(&op, &Boundary::Values { left, right }, tol))?;
    Ok((axis.coords(), mode.wave.psi, mode.residual))
}

#[pymodule]
fn entroq_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("EntroqError", m.py().get_type::<EntroqError>())?;
    m.add_function(wrap_pyfunction!(gibbs_minimize, m)?)?;
    m.add_function(wrap_pyfunction!(dewitt_identity_residual, m)?)?;
    m.add_function(wrap_pyfunction!(fluctuation_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(oscillator_ground_energy, m)?)?;
    m.add_function(wrap_pyfunction!(frw_zero_mode, m)?)?;
    Ok(())
}
