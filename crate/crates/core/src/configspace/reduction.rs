//! Coefficient table for homogeneous isotropic cosmology.
//!
//! With `h_ij = a² δ_ij` over a fiducial volume `V₀`, the gravitational
//! action reduces to `L = (3V₀/8πG)(−a ȧ²/N + k N a)`. Its Legendre
//! transform gives
//!
//! ```text
//! H = N [ −(2πG / 3V₀a) p_a² − (3kV₀ / 8πG) a ]
//! ```
//!
//! and a homogeneous massless scalar adds `N p_φ² / (2V₀a³)`. Each entry
//! below stores one of these monomials as `coefficient · a^power`, with the
//! coupling factor it multiplies noted alongside. Unit tests rebuild every
//! entry from the supermetric and from the curvature of the constant-`k`
//! slices.

use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Monomial {
    pub coefficient: f64,
    pub power: i32,
}

impl Monomial {
    pub fn eval(&self, a: f64) -> f64 {
        self.coefficient * a.powi(self.power)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrwTable {
    /// Scale-factor kinetic coefficient, times `G / V₀`.
    pub kinetic: Monomial,
    /// Curvature potential, times `k V₀ / G`.
    pub potential: Monomial,
    /// Configuration measure `√h`.
    pub measure: Monomial,
    /// Homogeneous scalar kinetic coefficient, times `1 / V₀`.
    pub scalar_kinetic: Monomial,
}

pub const FRW_TABLE: FrwTable = FrwTable {
    kinetic: Monomial {
        coefficient: -4.0 * PI / 3.0,
        power: -1,
    },
    potential: Monomial {
        coefficient: -3.0 / (8.0 * PI),
        power: 1,
    },
    measure: Monomial {
        coefficient: 1.0,
        power: 3,
    },
    scalar_kinetic: Monomial {
        coefficient: 1.0,
        power: -3,
    },
};

pub fn frw_kinetic(a: f64, grav: f64, fiducial_volume: f64) -> f64 {
    FRW_TABLE.kinetic.eval(a) * grav / fiducial_volume
}

pub fn frw_potential(a: f64, curvature: i8, grav: f64, fiducial_volume: f64) -> f64 {
    if curvature == 0 {
        return 0.0;
    }
    FRW_TABLE.potential.eval(a) * curvature as f64 * fiducial_volume / grav
}

pub fn frw_measure(a: f64) -> f64 {
    FRW_TABLE.measure.eval(a)
}

pub fn scalar_kinetic(a: f64, fiducial_volume: f64) -> f64 {
    FRW_TABLE.scalar_kinetic.eval(a) / fiducial_volume
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspace::dewitt_supermetric;

    type Metric = fn(f64, f64, [f64; 3]) -> [[f64; 3]; 3];

    fn slice_metric(a: f64, k: f64, x: [f64; 3]) -> [[f64; 3]; 3] {
        let r = if k > 0.0 {
            x[0].sin()
        } else if k < 0.0 {
            x[0].sinh()
        } else {
            x[0]
        };
        let mut g = [[0.0; 3]; 3];
        g[0][0] = a * a;
        g[1][1] = a * a * r * r;
        g[2][2] = a * a * r * r * x[1].sin().powi(2);
        g
    }

    fn inv3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let n = nalgebra::Matrix3::from_fn(|i, j| m[i][j]).try_inverse().unwrap();
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = n[(i, j)];
            }
        }
        out
    }

    fn christoffel(metric: Metric, a: f64, k: f64, x: [f64; 3]) -> [[[f64; 3]; 3]; 3] {
        let h = 1e-5;
        let mut dg = [[[0.0; 3]; 3]; 3];
        for l in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[l] += h;
            xm[l] -= h;
            let gp = metric(a, k, xp);
            let gm = metric(a, k, xm);
            for i in 0..3 {
                for j in 0..3 {
                    dg[l][i][j] = (gp[i][j] - gm[i][j]) / (2.0 * h);
                }
            }
        }
        let gi = inv3(&metric(a, k, x));
        let mut c = [[[0.0; 3]; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for kk in 0..3 {
                    c[i][j][kk] = (0..3)
                        .map(|l| 0.5 * gi[i][l] * (dg[j][l][kk] + dg[kk][l][j] - dg[l][j][kk]))
                        .sum();
                }
            }
        }
        c
    }

    fn ricci_scalar(metric: Metric, a: f64, k: f64, x: [f64; 3]) -> f64 {
        let h = 1e-3;
        let gam = christoffel(metric, a, k, x);
        let mut dgam = [[[[0.0; 3]; 3]; 3]; 3];
        for m in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[m] += h;
            xm[m] -= h;
            let cp = christoffel(metric, a, k, xp);
            let cm = christoffel(metric, a, k, xm);
            for i in 0..3 {
                for j in 0..3 {
                    for l in 0..3 {
                        dgam[m][i][j][l] = (cp[i][j][l] - cm[i][j][l]) / (2.0 * h);
                    }
                }
            }
        }
        let gi = inv3(&metric(a, k, x));
        let mut r = 0.0;
        for j in 0..3 {
            for l in 0..3 {
                let mut ric = 0.0;
                for i in 0..3 {
                    ric += dgam[i][i][j][l] - dgam[l][i][j][i];
                    for p in 0..3 {
                        ric += gam[i][i][p] * gam[p][j][l] - gam[i][l][p] * gam[p][j][i];
                    }
                }
                r += gi[j][l] * ric;
            }
        }
        r
    }

    #[test]
    fn curvature_oracle_matches_potential() {
        let (g, v0) = (0.7, 2.5);
        for k in [-1i8, 0, 1] {
            for a in [0.5, 1.0, 1.7, 3.0] {
                let r3 = ricci_scalar(slice_metric, a, k as f64, [0.9, 1.1, 0.3]);
                assert!((r3 - 6.0 * k as f64 / (a * a)).abs() < 1e-4 / (a * a), "k={k} a={a} R={r3}");
                let sqrt_h = a.powi(3);
                let reduced = -v0 * sqrt_h * r3 / (16.0 * PI * g);
                let table = frw_potential(a, k, g, v0);
                assert!((reduced - table).abs() < 1e-4 * v0 * a / g, "k={k} a={a}");
            }
        }
    }

    #[test]
    fn supermetric_contraction_matches_kinetic_coefficient() {
        let (g, v0) = (1.3, 0.8);
        for i in 1..=10 {
            let a = 0.3 * i as f64;
            let mut h = [[0.0; 3]; 3];
            let mut dh = [[0.0; 3]; 3];
            let mut delta = [[0.0; 3]; 3];
            for d in 0..3 {
                h[d][d] = a * a;
                dh[d][d] = 2.0 * a;
                delta[d][d] = 1.0;
            }
            let sm = dewitt_supermetric(&h).unwrap();
            let sqrt_h = a.powi(3);
            // Lagrangian route: L = M ȧ² with M = V₀√h/(16πG) · ¼ ḣ G ḣ, so the
            // Hamiltonian coefficient of ½p² is 1/(2M).
            let m = v0 * sqrt_h / (16.0 * PI * g) * 0.25 * sm.upper_form(&dh, &dh);
            let from_lagrangian = 1.0 / (2.0 * m);
            // Hamiltonian route: π^ij = p δ^ij / (6aV₀) in H = V₀ (16πG/√h) π G π.
            let scale = 1.0 / (6.0 * a * v0);
            let from_hamiltonian = 2.0 * v0 * 16.0 * PI * g / sqrt_h * scale * scale * sm.lower_form(&delta, &delta);
            let table = frw_kinetic(a, g, v0);
            assert!((from_lagrangian - table).abs() < 1e-12 * table.abs(), "a={a}");
            assert!((from_hamiltonian - table).abs() < 1e-12 * table.abs(), "a={a}");
            assert!(table < 0.0);
        }
    }

    #[test]
    fn measure_is_volume_element() {
        assert_eq!(frw_measure(2.0) / frw_measure(1.0), 8.0);
        assert!((scalar_kinetic(1.0, 3.0) - 1.0 / 3.0).abs() < 1e-15);
    }
}
