//! Discretized configuration spaces: lattice scalar fields and homogeneous
//! cosmological minisuperspace.
//!
//! Every space stores the Hamiltonian in the form
//! `H(q, p) = ½ Σ_A K_A(q) p_A² + U(q)`, with a diagonal kinetic
//! coefficient `K_A` per node and axis. The lapse is kept separate and
//! multiplies the generator of time evolution.

mod dewitt;
pub mod reduction;

pub use dewitt::{dewitt_supermetric, SuperMetricSample};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, Grid};

/// Physical units and gauge choices shared by every pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    /// Gravitational coupling. Zero is accepted to switch gravity off, but
    /// builders that divide by it reject zero.
    pub grav: f64,
    pub lapse: f64,
    /// Shift vector magnitude; every implemented model uses the zero shift.
    #[serde(default)]
    pub shift: f64,
    /// Tsallis order.
    #[serde(default = "one")]
    pub alpha: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            hbar: 1.0,
            grav: 1.0,
            lapse: 1.0,
            shift: 0.0,
            alpha: 1.0,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(Error::param("hbar", format!("must be positive, got {}", self.hbar)));
        }
        if !(self.grav >= 0.0 && self.grav.is_finite()) {
            return Err(Error::param("grav", format!("must be non-negative, got {}", self.grav)));
        }
        if !(self.lapse > 0.0 && self.lapse.is_finite()) {
            return Err(Error::param("lapse", format!("must be positive, got {}", self.lapse)));
        }
        if self.shift != 0.0 {
            return Err(Error::param("shift", "only the zero shift is supported"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::param("alpha", format!("must be positive, got {}", self.alpha)));
        }
        Ok(())
    }

    pub fn with_hbar(self, hbar: f64) -> Self {
        PhysicalConstants { hbar, ..self }
    }

    pub fn with_grav(self, grav: f64) -> Self {
        PhysicalConstants { grav, ..self }
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        PhysicalConstants { alpha, ..self }
    }

    /// `√α ħ`, the action unit that appears in the wave phase.
    pub fn effective_hbar(&self) -> f64 {
        self.alpha.sqrt() * self.hbar
    }
}

/// Periodic one-dimensional lattice for a scalar field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub sites: usize,
    pub spacing: f64,
}

impl LatticeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sites < 1 {
            return Err(Error::param("sites", "lattice needs at least one site"));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::param("spacing", format!("must be positive, got {}", self.spacing)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    ScalarLattice,
    Frw,
    Coupled,
}

impl std::fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SpaceKind::ScalarLattice => "scalar-lattice",
            SpaceKind::Frw => "frw",
            SpaceKind::Coupled => "coupled",
        })
    }
}

/// The analytic model a space was built from, kept so coefficients can be
/// evaluated off-node (for example at half nodes).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum SpaceModel {
    ScalarLattice { lattice: LatticeSpec, mass: f64 },
    Frw { curvature: i8, fiducial_volume: f64 },
    Coupled { curvature: i8, fiducial_volume: f64 },
    /// Constant kinetic coefficients with a tabulated potential; used to
    /// probe operator properties on a known background.
    Uniform { kinetic: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigSpace {
    kind: SpaceKind,
    model: SpaceModel,
    grid: Grid,
    constants: PhysicalConstants,
    measure: Vec<f64>,
    /// Node-major diagonal kinetic coefficients, `dim` entries per node.
    kinetic: Vec<f64>,
    potential: Vec<f64>,
}

/// Periodic-lattice scalar potential: gradient energy over the edges
/// `(i, i+1 mod n)` plus the mass term, both with the lattice cell weight.
pub fn lattice_potential(phi: &[f64], spacing: f64, mass: f64) -> f64 {
    let n = phi.len();
    (0..n)
        .map(|i| {
            let grad = (phi[(i + 1) % n] - phi[i]) / spacing;
            0.5 * grad * grad + 0.5 * mass * mass * phi[i] * phi[i]
        })
        .sum::<f64>()
        * spacing
}

impl ConfigSpace {
    fn assemble(kind: SpaceKind, model: SpaceModel, grid: Grid, constants: PhysicalConstants) -> Self {
        let mut space = ConfigSpace {
            kind,
            model,
            measure: Vec::new(),
            kinetic: Vec::with_capacity(grid.len() * grid.dim()),
            potential: Vec::with_capacity(grid.len()),
            grid,
            constants,
        };
        let mut point = vec![0.0; space.grid.dim()];
        let mut measure = Vec::with_capacity(space.grid.len());
        for f in 0..space.grid.len() {
            space.grid.point_into(f, &mut point);
            measure.push(space.measure_at(&point));
            let k = space.kinetic_at(&point);
            space.kinetic.extend(k);
            let u = space.potential_at(&point);
            space.potential.push(u);
        }
        space.measure = measure;
        space
    }

    /// Constant-coefficient space with a tabulated potential.
    pub fn uniform(
        kind: SpaceKind,
        grid: Grid,
        kinetic: Vec<f64>,
        potential: Vec<f64>,
        constants: PhysicalConstants,
    ) -> Result<Self> {
        constants.validate()?;
        if kinetic.len() != grid.dim() {
            return Err(Error::ShapeMismatch {
                expected: grid.dim(),
                got: kinetic.len(),
            });
        }
        if potential.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                got: potential.len(),
            });
        }
        let mut space = Self::assemble(kind, SpaceModel::Uniform { kinetic }, grid, constants);
        space.potential = potential;
        Ok(space)
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn model(&self) -> &SpaceModel {
        &self.model
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn constants(&self) -> &PhysicalConstants {
        &self.constants
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// Kinetic coefficient for axis `axis` at node `node`.
    #[inline]
    pub fn kinetic(&self, node: usize, axis: usize) -> f64 {
        self.kinetic[node * self.dim() + axis]
    }

    /// All nodal kinetic coefficients for one axis.
    pub fn kinetic_along(&self, axis: usize) -> Vec<f64> {
        (0..self.len()).map(|f| self.kinetic(f, axis)).collect()
    }

    /// Full kinetic matrix at a node (diagonal in every implemented model).
    pub fn kinetic_matrix(&self, node: usize) -> nalgebra::DMatrix<f64> {
        let d = self.dim();
        nalgebra::DMatrix::from_fn(d, d, |i, j| if i == j { self.kinetic(node, i) } else { 0.0 })
    }

    pub fn fiducial_volume(&self) -> Option<f64> {
        match self.model {
            SpaceModel::Frw { fiducial_volume, .. } | SpaceModel::Coupled { fiducial_volume, .. } => {
                Some(fiducial_volume)
            }
            _ => None,
        }
    }

    pub fn curvature(&self) -> Option<i8> {
        match self.model {
            SpaceModel::Frw { curvature, .. } | SpaceModel::Coupled { curvature, .. } => Some(curvature),
            _ => None,
        }
    }

    /// Kinetic coefficients evaluated exactly at an arbitrary point.
    pub fn kinetic_at(&self, point: &[f64]) -> Vec<f64> {
        let g = self.constants.grav;
        match &self.model {
            SpaceModel::ScalarLattice { lattice, .. } => vec![1.0 / lattice.spacing; lattice.sites],
            SpaceModel::Frw { fiducial_volume, .. } => {
                vec![reduction::frw_kinetic(point[0], g, *fiducial_volume)]
            }
            SpaceModel::Coupled { fiducial_volume, .. } => vec![
                reduction::frw_kinetic(point[0], g, *fiducial_volume),
                reduction::scalar_kinetic(point[0], *fiducial_volume),
            ],
            SpaceModel::Uniform { kinetic } => kinetic.clone(),
        }
    }

    /// Potential evaluated at an arbitrary point. Tabulated spaces only know
    /// their nodal values and return 0 here.
    pub fn potential_at(&self, point: &[f64]) -> f64 {
        match &self.model {
            SpaceModel::ScalarLattice { lattice, mass } => lattice_potential(point, lattice.spacing, *mass),
            SpaceModel::Frw {
                curvature,
                fiducial_volume,
            }
            | SpaceModel::Coupled {
                curvature,
                fiducial_volume,
            } => reduction::frw_potential(point[0], *curvature, self.constants.grav, *fiducial_volume),
            SpaceModel::Uniform { .. } => 0.0,
        }
    }

    pub fn measure_at(&self, point: &[f64]) -> f64 {
        match self.model {
            SpaceModel::Frw { .. } | SpaceModel::Coupled { .. } => reduction::frw_measure(point[0]),
            _ => 1.0,
        }
    }

    /// Classical Hamiltonian `½ Σ K_A p_A² + U` at a node.
    pub fn hamiltonian(&self, node: usize, momentum: &[f64]) -> f64 {
        let kin: f64 = momentum
            .iter()
            .enumerate()
            .map(|(a, p)| 0.5 * self.kinetic(node, a) * p * p)
            .sum();
        kin + self.potential[node]
    }

    /// Rebuild the same space under different constants.
    pub fn with_constants(&self, constants: PhysicalConstants) -> Result<Self> {
        constants.validate()?;
        match &self.model {
            SpaceModel::Frw { .. } | SpaceModel::Coupled { .. } if constants.grav == 0.0 => {
                Err(Error::param("grav", "gravitational spaces need G > 0"))
            }
            SpaceModel::Uniform { kinetic } => {
                Self::uniform(self.kind, self.grid.clone(), kinetic.clone(), self.potential.clone(), constants)
            }
            model => Ok(Self::assemble(self.kind, model.clone(), self.grid.clone(), constants)),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("space serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let space: ConfigSpace =
            serde_json::from_str(text).map_err(|e| Error::param("space", e.to_string()))?;
        space.constants.validate()?;
        let n = space.grid.len();
        if space.measure.len() != n || space.potential.len() != n || space.kinetic.len() != n * space.dim() {
            return Err(Error::ShapeMismatch {
                expected: n,
                got: space.potential.len(),
            });
        }
        Ok(space)
    }
}

/// One axis per lattice site, all with the same field bounds.
pub fn build_scalar_lattice_space(
    spec: LatticeSpec,
    mass: f64,
    field_axis: &Axis,
    constants: PhysicalConstants,
) -> Result<ConfigSpace> {
    spec.validate()?;
    constants.validate()?;
    if !(mass >= 0.0 && mass.is_finite()) {
        return Err(Error::param("mass", format!("must be non-negative, got {mass}")));
    }
    field_axis.validate()?;
    let axes = (0..spec.sites)
        .map(|i| Axis {
            name: format!("phi{i}"),
            ..field_axis.clone()
        })
        .collect();
    let grid = Grid::new(axes)?;
    Ok(ConfigSpace::assemble(
        SpaceKind::ScalarLattice,
        SpaceModel::ScalarLattice { lattice: spec, mass },
        grid,
        constants,
    ))
}

fn check_frw(curvature: i8, fiducial_volume: f64, a_axis: &Axis, constants: &PhysicalConstants) -> Result<()> {
    constants.validate()?;
    if constants.grav <= 0.0 {
        return Err(Error::param("grav", "gravitational spaces need G > 0"));
    }
    if !(-1..=1).contains(&curvature) {
        return Err(Error::param("curvature", format!("must be -1, 0 or 1, got {curvature}")));
    }
    if !(fiducial_volume > 0.0 && fiducial_volume.is_finite()) {
        return Err(Error::param("fiducial_volume", "must be positive"));
    }
    a_axis.validate()?;
    if a_axis.min <= 0.0 {
        return Err(Error::param("a_min", format!("scale factor axis must start above 0, got {}", a_axis.min)));
    }
    if a_axis.periodic {
        return Err(Error::param("a_axis", "scale factor axis cannot be periodic"));
    }
    Ok(())
}

/// Homogeneous isotropic minisuperspace with the scale factor as the only
/// coordinate.
pub fn build_frw_space(
    curvature: i8,
    fiducial_volume: f64,
    a_axis: &Axis,
    constants: PhysicalConstants,
) -> Result<ConfigSpace> {
    check_frw(curvature, fiducial_volume, a_axis, &constants)?;
    let axis = Axis {
        name: "a".into(),
        ..a_axis.clone()
    };
    Ok(ConfigSpace::assemble(
        SpaceKind::Frw,
        SpaceModel::Frw {
            curvature,
            fiducial_volume,
        },
        Grid::new(vec![axis])?,
        constants,
    ))
}

/// Scale factor plus a homogeneous massless scalar.
pub fn build_coupled_space(frw: &ConfigSpace, phi_axis: &Axis, constants: PhysicalConstants) -> Result<ConfigSpace> {
    let (curvature, fiducial_volume) = match frw.model {
        SpaceModel::Frw {
            curvature,
            fiducial_volume,
        } if frw.kind == SpaceKind::Frw => (curvature, fiducial_volume),
        _ => return Err(Error::WrongSpace(format!("expected an frw space, got {}", frw.kind))),
    };
    let a_axis = frw.grid.axis(0).clone();
    check_frw(curvature, fiducial_volume, &a_axis, &constants)?;
    phi_axis.validate()?;
    let phi = Axis {
        name: "phi".into(),
        ..phi_axis.clone()
    };
    Ok(ConfigSpace::assemble(
        SpaceKind::Coupled,
        SpaceModel::Coupled {
            curvature,
            fiducial_volume,
        },
        Grid::new(vec![a_axis, phi])?,
        constants,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field() -> Axis {
        Axis::new("phi", -2.0, 2.0, 5).unwrap()
    }

    fn edge_sum(phi: &[f64], dx: f64) -> f64 {
        let n = phi.len();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                if j == (i + 1) % n {
                    total += 0.5 * (phi[j] - phi[i]).powi(2) / dx;
                }
            }
        }
        total
    }

    #[test]
    fn single_site_massless_has_no_potential() {
        let s = build_scalar_lattice_space(LatticeSpec { sites: 1, spacing: 1.0 }, 0.0, &field(), Default::default())
            .unwrap();
        assert!(s.potential().iter().all(|&u| u == 0.0));
    }

    #[test]
    fn single_site_massive_is_harmonic() {
        let s = build_scalar_lattice_space(LatticeSpec { sites: 1, spacing: 1.0 }, 1.0, &field(), Default::default())
            .unwrap();
        for f in 0..s.len() {
            let x = s.grid().point(f)[0];
            assert!((s.potential()[f] - 0.5 * x * x).abs() < 1e-15);
        }
        assert_eq!(s.kinetic(0, 0), 1.0);
    }

    #[test]
    fn two_site_gradient_matches_edge_sum() {
        let s = build_scalar_lattice_space(LatticeSpec { sites: 2, spacing: 1.0 }, 0.0, &field(), Default::default())
            .unwrap();
        for f in 0..s.len() {
            let p = s.grid().point(f);
            assert!((s.potential()[f] - edge_sum(&p, 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_invalid_lattices() {
        let c = PhysicalConstants::default();
        assert!(build_scalar_lattice_space(LatticeSpec { sites: 0, spacing: 1.0 }, 0.0, &field(), c).is_err());
        assert!(build_scalar_lattice_space(LatticeSpec { sites: 1, spacing: 1.0 }, -1.0, &field(), c).is_err());
        let bad = Axis {
            max: f64::NAN,
            ..field()
        };
        assert!(build_scalar_lattice_space(LatticeSpec { sites: 1, spacing: 1.0 }, 0.0, &bad, c).is_err());
    }

    #[test]
    fn frw_measure_and_signs() {
        let ax = Axis::new("a", 1.0, 2.0, 3).unwrap();
        for k in [-1, 0, 1] {
            let s = build_frw_space(k, 1.0, &ax, Default::default()).unwrap();
            assert!((s.measure()[2] / s.measure()[0] - 8.0).abs() < 1e-14);
            assert!(s.kinetic_along(0).iter().all(|&g| g < 0.0));
            if k == 0 {
                assert!(s.potential().iter().all(|&u| u == 0.0));
            }
        }
        assert!(build_frw_space(0, 1.0, &Axis::new("a", 0.0, 1.0, 3).unwrap(), Default::default()).is_err());
        assert!(build_frw_space(2, 1.0, &ax, Default::default()).is_err());
    }

    #[test]
    fn coupled_space_blocks() {
        let ax = Axis::new("a", 0.5, 2.0, 7).unwrap();
        let frw = build_frw_space(1, 2.0, &ax, Default::default()).unwrap();
        let phi = Axis::new("phi", -1.0, 1.0, 5).unwrap();
        let c = build_coupled_space(&frw, &phi, Default::default()).unwrap();
        for f in 0..c.len() {
            let ia = c.grid().index_along(f, 0);
            assert_eq!(c.kinetic(f, 0), frw.kinetic(ia, 0));
            assert_eq!(c.potential()[f], frw.potential()[ia]);
        }
        let at_one = c.kinetic_at(&[1.0, 0.0])[1];
        assert!((0.5 * at_one - 1.0 / (2.0 * 2.0)).abs() < 1e-15);
        assert!(matches!(
            build_coupled_space(&c, &phi, Default::default()),
            Err(Error::WrongSpace(_))
        ));
    }

    #[test]
    fn json_roundtrip() {
        let ax = Axis::new("a", 0.5, 2.0, 7).unwrap();
        let s = build_frw_space(-1, 1.0, &ax, Default::default()).unwrap();
        let back = ConfigSpace::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
    }
}
