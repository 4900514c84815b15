//! Numerical toolkit for entropy-corrected variational quantization of
//! scalar fields and homogeneous cosmology.

pub mod configspace;
pub mod emergent;
pub mod entropy;
pub mod error;
pub mod fluctuation;
pub mod grid;
pub mod linalg;
pub mod ode;
pub mod madelung;
pub mod rng;
pub mod variational;
pub mod wdw;

pub use configspace::{
    build_coupled_space, build_frw_space, build_scalar_lattice_space, dewitt_supermetric, ConfigSpace,
    LatticeSpec, PhysicalConstants, SpaceKind, SpaceModel, SuperMetricSample,
};
pub use error::{Error, Result};
pub use grid::{Axis, Grid};
