use entroq::madelung::{ground_state, KineticStencil};
use entroq::{build_scalar_lattice_space, Axis, LatticeSpec, PhysicalConstants};
use nalgebra::DMatrix;

/// Zero-point energy from an independent diagonalization of the lattice
/// quadratic form `ω² = K · ∂²U`.
fn dispersion_oracle(sites: usize, spacing: f64, mass: f64, hbar: f64) -> f64 {
    let mut hess = DMatrix::<f64>::zeros(sites, sites);
    for i in 0..sites {
        let j = (i + 1) % sites;
        // Edge term ½ Δx ((φ_j − φ_i)/Δx)² and mass term ½ Δx m² φ_i².
        let w = 1.0 / spacing;
        hess[(i, i)] += w + spacing * mass * mass;
        hess[(j, j)] += w;
        hess[(i, j)] -= w;
        hess[(j, i)] -= w;
    }
    if sites == 1 {
        hess[(0, 0)] = spacing * mass * mass;
    }
    let freq2 = hess / spacing;
    freq2.symmetric_eigenvalues().iter().map(|w2| 0.5 * hbar * w2.sqrt()).sum()
}

#[test]
fn oscillator_ground_energy() {
    let space = build_scalar_lattice_space(LatticeSpec { sites: 1, spacing: 1.0 }, 1.0, &Axis::new("phi", -8.0, 8.0, 8001).unwrap(), PhysicalConstants::default()).unwrap();
    let g = ground_state(&space, 1e-9, KineticStencil::Central2).unwrap();
    assert!((g.energy - 0.5).abs() < 1e-6, "{}", g.energy);
}

#[test]
fn small_lattices_match_dispersion() {
    for sites in 1..=3usize {
        let axis = Axis::new("phi", -5.0, 5.0, 41).unwrap();
        let space = build_scalar_lattice_space(LatticeSpec { sites, spacing: 1.0 }, 1.0, &axis, PhysicalConstants::default()).unwrap();
        let t = std::time::Instant::now();
        let g = ground_state(&space, 1e-8, KineticStencil::Sinc).unwrap();
        let exact = dispersion_oracle(sites, 1.0, 1.0, 1.0);
        println!("n={sites} E={:.12} exact={exact:.12} it={} {:?}", g.energy, g.iterations, t.elapsed());
        assert!((g.energy - exact).abs() < 1e-6);
    }
}
