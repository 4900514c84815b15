use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::WaveState;
use crate::configspace::ConfigSpace;
use crate::error::{Error, Result};
use crate::linalg::{bicgstab, conjugate_gradient, dot, thomas, Csr};

/// Discretization of the kinetic operator used by [`ground_state`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KineticStencil {
    /// Three-point flux form, second order.
    Central2,
    /// Sinc discrete-variable representation on each axis. Spectrally
    /// accurate for smooth states; needs constant kinetic coefficients.
    Sinc,
}

/// Face coefficient between `f` and its `+1` neighbour along `axis`,
/// evaluated exactly at the midpoint.
pub(crate) fn face_kinetic(space: &ConfigSpace, f: usize, axis: usize) -> f64 {
    let grid = space.grid();
    let mut p = grid.point(f);
    p[axis] += 0.5 * grid.axis(axis).spacing();
    space.kinetic_at(&p)[axis]
}

/// `N [−(ħ'²/2) Σ_A ∂_A(K_A ∂_A) + U]` in flux form with Dirichlet
/// boundaries. Rows of boundary nodes are empty and their columns are
/// dropped, which clamps the amplitude there to zero.
pub fn hamiltonian_matrix(space: &ConfigSpace) -> Csr {
    let grid = space.grid();
    let c = space.constants();
    let k2 = c.effective_hbar().powi(2);
    let lapse = c.lapse;
    let mut trip = Vec::with_capacity(grid.len() * (1 + 2 * grid.dim()));
    for f in 0..grid.len() {
        if grid.on_boundary(f) {
            continue;
        }
        let mut diag = space.potential()[f];
        for axis in 0..grid.dim() {
            let h2 = grid.axis(axis).spacing().powi(2);
            for offset in [-1isize, 1] {
                let nb = grid.neighbor(f, axis, offset).expect("interior node has neighbours");
                let left = if offset < 0 { nb } else { f };
                let w = 0.5 * k2 * face_kinetic(space, left, axis) / h2;
                diag += w;
                if !grid.on_boundary(nb) {
                    trip.push((f, nb, -lapse * w));
                }
            }
        }
        trip.push((f, f, lapse * diag));
    }
    Csr::from_triplets(grid.len(), grid.len(), trip)
}

/// Amplitude snapshots from [`evolve_schrodinger`].
#[derive(Clone, Debug)]
pub struct SchrodingerRun {
    /// Snapshots at steps `0, record_every, 2·record_every, …` and the last.
    pub states: Vec<WaveState>,
    /// Largest single-step change of `∫|ψ|²`.
    pub max_norm_drift: f64,
    /// Energy expectation at the start and end.
    pub energy: (f64, f64),
    pub steps: usize,
    pub dt: f64,
}

impl SchrodingerRun {
    pub fn last(&self) -> &WaveState {
        self.states.last().expect("run holds the initial state")
    }
}

fn expectation(h: &Csr, psi: &[Complex64], vol: f64) -> f64 {
    let hp = h.matvec_complex(psi);
    psi.iter().zip(&hp).map(|(a, b)| (a.conj() * b).re).sum::<f64>() * vol
}

enum Stepper {
    Tridiagonal {
        sub: Vec<Complex64>,
        diag: Vec<Complex64>,
        sup: Vec<Complex64>,
    },
    Iterative,
}

/// Crank–Nicolson stepping of `iħ' ∂ψ/∂t = Hψ`. The Cayley form is unitary
/// for the symmetric `H`, so only solver error changes the norm.
pub fn evolve_schrodinger(
    state: &WaveState,
    space: &ConfigSpace,
    dt: f64,
    steps: usize,
    record_every: usize,
) -> Result<SchrodingerRun> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    let grid = space.grid();
    if state.psi.len() != grid.len() {
        return Err(Error::ShapeMismatch {
            expected: grid.len(),
            got: state.psi.len(),
        });
    }
    let record_every = record_every.max(1);
    let h = hamiltonian_matrix(space);
    let vol = grid.cell_volume();
    let tau = Complex64::new(0.0, dt / (2.0 * space.constants().effective_hbar()));
    let one = Complex64::new(1.0, 0.0);

    let mut psi: Vec<Complex64> = state.psi.clone();
    for (f, z) in psi.iter_mut().enumerate() {
        if grid.on_boundary(f) {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    let stepper = match h.tridiagonal_bands() {
        Some((sub, diag, sup)) if grid.dim() == 1 && !grid.axis(0).periodic => Stepper::Tridiagonal {
            sub: sub.iter().map(|&v| tau * v).collect(),
            diag: diag.iter().map(|&v| one + tau * v).collect(),
            sup: sup.iter().map(|&v| tau * v).collect(),
        },
        _ => Stepper::Iterative,
    };
    let norm = |p: &[Complex64]| p.iter().map(|z| z.norm_sqr()).sum::<f64>() * vol;
    let e0 = expectation(&h, &psi, vol);
    let mut states = vec![WaveState::new(psi.clone(), state.time)];
    let mut drift: f64 = 0.0;
    let mut last_norm = norm(&psi);
    for step in 1..=steps {
        let hp = h.matvec_complex(&psi);
        let rhs: Vec<Complex64> = psi.iter().zip(&hp).map(|(p, q)| p - tau * q).collect();
        psi = match &stepper {
            Stepper::Tridiagonal { sub, diag, sup } => thomas(sub, diag, sup, &rhs)?,
            Stepper::Iterative => {
                let apply = |x: &[Complex64], out: &mut [Complex64]| {
                    let hx = h.matvec_complex(x);
                    for i in 0..x.len() {
                        out[i] = x[i] + tau * hx[i];
                    }
                };
                bicgstab(apply, &rhs, Some(&psi), 1e-14, 2000)?.x
            }
        };
        let n = norm(&psi);
        drift = drift.max((n - last_norm).abs());
        last_norm = n;
        if step % record_every == 0 || step == steps {
            states.push(WaveState::new(psi.clone(), state.time + step as f64 * dt));
        }
    }
    let e1 = expectation(&h, &psi, vol);
    Ok(SchrodingerRun {
        states,
        max_norm_drift: drift,
        energy: (e0, e1),
        steps,
        dt,
    })
}

/// Lowest eigenpair of the Dirichlet Hamiltonian.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub energy: f64,
    pub wave: WaveState,
    /// `‖Hψ − Eψ‖ / |E|` in the grid norm.
    pub residual: f64,
    pub iterations: usize,
}

/// Interior-node operator used by the eigen-solver.
struct InteriorOperator<'a> {
    space: &'a ConfigSpace,
    /// Global node of each interior index.
    nodes: Vec<usize>,
    /// Interior extent along each axis.
    shape: Vec<usize>,
    kind: OperatorKind,
}

enum OperatorKind {
    Sparse(Csr),
    /// Dense per-axis kinetic blocks plus the nodal potential.
    Sinc { blocks: Vec<Vec<f64>>, potential: Vec<f64> },
}

impl<'a> InteriorOperator<'a> {
    fn new(space: &'a ConfigSpace, stencil: KineticStencil) -> Result<Self> {
        let grid = space.grid();
        let nodes = grid.interior_nodes();
        let shape: Vec<usize> = grid
            .axes()
            .iter()
            .map(|a| if a.periodic { a.points } else { a.points - 2 })
            .collect();
        let c = space.constants();
        let kind = match stencil {
            KineticStencil::Central2 => {
                let mut local = vec![usize::MAX; grid.len()];
                for (i, &f) in nodes.iter().enumerate() {
                    local[f] = i;
                }
                let trip = hamiltonian_matrix(space)
                    .triplets()
                    .into_iter()
                    .map(|(r, col, v)| (local[r], local[col], v))
                    .collect();
                OperatorKind::Sparse(Csr::from_triplets(nodes.len(), nodes.len(), trip))
            }
            KineticStencil::Sinc => {
                let mut blocks = Vec::with_capacity(grid.dim());
                for axis in 0..grid.dim() {
                    let a = grid.axis(axis);
                    if a.periodic {
                        return Err(Error::param("stencil", "sinc representation needs non-periodic axes"));
                    }
                    let coeff = space.kinetic_along(axis);
                    let k0 = coeff[0];
                    if coeff.iter().any(|&k| (k - k0).abs() > 1e-14 * k0.abs()) {
                        return Err(Error::param("stencil", "sinc representation needs constant kinetic coefficients"));
                    }
                    let m = shape[axis];
                    let scale = c.lapse * 0.5 * c.effective_hbar().powi(2) * k0 / a.spacing().powi(2);
                    let mut t = vec![0.0; m * m];
                    for i in 0..m {
                        for j in 0..m {
                            t[i * m + j] = if i == j {
                                scale * std::f64::consts::PI.powi(2) / 3.0
                            } else {
                                let d = i as f64 - j as f64;
                                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                                scale * sign * 2.0 / (d * d)
                            };
                        }
                    }
                    blocks.push(t);
                }
                let potential = nodes.iter().map(|&f| c.lapse * space.potential()[f]).collect();
                OperatorKind::Sinc { blocks, potential }
            }
        };
        Ok(InteriorOperator {
            space,
            nodes,
            shape,
            kind,
        })
    }

    fn len(&self) -> usize {
        self.nodes.len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            OperatorKind::Sparse(m) => out.copy_from_slice(&m.matvec(x)),
            OperatorKind::Sinc { blocks, potential } => {
                for i in 0..x.len() {
                    out[i] = potential[i] * x[i];
                }
                let d = self.shape.len();
                for axis in 0..d {
                    let m = self.shape[axis];
                    let stride: usize = self.shape[axis + 1..].iter().product();
                    let t = &blocks[axis];
                    let lines = x.len() / m;
                    let mut line = vec![0.0; m];
                    for l in 0..lines {
                        let outer = l / stride;
                        let inner = l % stride;
                        let base = outer * m * stride + inner;
                        for (i, v) in line.iter_mut().enumerate() {
                            *v = x[base + i * stride];
                        }
                        for i in 0..m {
                            let row = &t[i * m..(i + 1) * m];
                            out[base + i * stride] += dot(row, &line);
                        }
                    }
                }
            }
        }
    }

    /// Lower bound of the spectrum that keeps `H − σ` positive definite.
    fn safe_shift(&self) -> f64 {
        let u = self.space.potential();
        let lapse = self.space.constants().lapse;
        let umin = self.nodes.iter().map(|&f| u[f]).fold(f64::INFINITY, f64::min);
        let s = lapse * umin;
        s - 1e-9 * s.abs().max(1.0)
    }

    /// `(H − σ)x = b`.
    fn solve_shifted(&self, sigma: f64, b: &[f64], x0: &[f64], tol: f64) -> Result<Vec<f64>> {
        if let OperatorKind::Sparse(m) = &self.kind {
            if self.shape.len() == 1 && !self.space.grid().axis(0).periodic {
                let (sub, mut diag, sup) = m.tridiagonal_bands().expect("one-axis operator is tridiagonal");
                for d in diag.iter_mut() {
                    *d -= sigma;
                }
                return thomas(&sub, &diag, &sup, b);
            }
        }
        let apply = |v: &[f64], out: &mut [f64]| {
            self.apply(v, out);
            for i in 0..v.len() {
                out[i] -= sigma * v[i];
            }
        };
        Ok(conjugate_gradient(apply, b, Some(x0), tol, 20 * self.len().max(100))?.x)
    }
}

/// Lowest eigenpair by shifted inverse iteration, for spaces whose kinetic
/// form is positive definite. Iteration stops once the relative residual
/// `‖Hψ − Eψ‖/|E|` drops below `tol`.
pub fn ground_state(space: &ConfigSpace, tol: f64, stencil: KineticStencil) -> Result<GroundState> {
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let grid = space.grid();
    for axis in 0..grid.dim() {
        if space.kinetic_along(axis).iter().any(|&k| k <= 0.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "kinetic form along axis {axis} is not positive definite"
            )));
        }
    }
    let op = InteriorOperator::new(space, stencil)?;
    let n = op.len();
    if n == 0 {
        return Err(Error::Degenerate("grid has no interior nodes".into()));
    }
    let vol = grid.cell_volume();
    let sigma = op.safe_shift();

    // Start from a product of Gaussians centred in the box.
    let mut x: Vec<f64> = op
        .nodes
        .iter()
        .map(|&f| {
            let p = grid.point(f);
            let r2: f64 = p
                .iter()
                .zip(grid.axes())
                .map(|(q, a)| {
                    let mid = 0.5 * (a.min + a.max);
                    (q - mid).powi(2)
                })
                .sum();
            (-0.5 * r2).exp()
        })
        .collect();
    let normalize = |v: &mut Vec<f64>| {
        let s = (dot(v, v) * vol).sqrt();
        v.iter_mut().for_each(|e| *e /= s);
    };
    normalize(&mut x);
    let mut hx = vec![0.0; n];
    let max_iter = 2000;
    let mut energy = 0.0;
    let mut residual = f64::INFINITY;
    for it in 0..max_iter {
        op.apply(&x, &mut hx);
        energy = dot(&x, &hx) * vol;
        let r: f64 = hx.iter().zip(&x).map(|(h, v)| (h - energy * v).powi(2)).sum::<f64>() * vol;
        residual = r.sqrt() / energy.abs().max(f64::MIN_POSITIVE);
        if residual <= tol {
            let mut psi = vec![Complex64::new(0.0, 0.0); grid.len()];
            for (i, &f) in op.nodes.iter().enumerate() {
                psi[f] = Complex64::new(x[i], 0.0);
            }
            return Ok(GroundState {
                energy,
                wave: WaveState::new(psi, 0.0),
                residual,
                iterations: it,
            });
        }
        let guess: Vec<f64> = x.iter().map(|v| v / (energy - sigma)).collect();
        x = op.solve_shifted(sigma, &x, &guess, 1e-13)?;
        normalize(&mut x);
    }
    let _ = energy;
    Err(Error::NoConvergence {
        method: "inverse iteration",
        iterations: max_iter,
        residual,
    })
}
