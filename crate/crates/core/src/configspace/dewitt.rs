use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rank4 = [[[[f64; 3]; 3]; 3]; 3];

/// The supermetric on symmetric 3×3 tensors at one spatial metric, with
/// both index placements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperMetricSample {
    pub metric: [[f64; 3]; 3],
    pub lower: Rank4,
    pub upper: Rank4,
}

impl SuperMetricSample {
    /// `Σ_kl lower_ijkl upper^klmn`.
    pub fn contraction(&self) -> Rank4 {
        let mut out = [[[[0.0; 3]; 3]; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for m in 0..3 {
                    for n in 0..3 {
                        let mut s = 0.0;
                        for k in 0..3 {
                            for l in 0..3 {
                                s += self.lower[i][j][k][l] * self.upper[k][l][m][n];
                            }
                        }
                        out[i][j][m][n] = s;
                    }
                }
            }
        }
        out
    }

    /// Largest deviation of the contraction from the symmetrized identity
    /// `½(δ_i^m δ_j^n + δ_i^n δ_j^m)`.
    pub fn identity_residual(&self) -> f64 {
        let c = self.contraction();
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for m in 0..3 {
                    for n in 0..3 {
                        let target = 0.5 * (d(i, m) * d(j, n) + d(i, n) * d(j, m));
                        worst = worst.max((c[i][j][m][n] - target).abs());
                    }
                }
            }
        }
        worst
    }

    /// `lower_ijkl a^ij b^kl` for symmetric tensors given with upper indices.
    pub fn lower_form(&self, a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> f64 {
        quad(&self.lower, a, b)
    }

    /// `upper^ijkl a_ij b_kl` for tensors given with lower indices.
    pub fn upper_form(&self, a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> f64 {
        quad(&self.upper, a, b)
    }
}

fn quad(t: &Rank4, a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    s += t[i][j][k][l] * a[i][j] * b[k][l];
                }
            }
        }
    }
    s
}

pub(crate) fn check_spd(h: &[[f64; 3]; 3]) -> Result<Matrix3<f64>> {
    let m = Matrix3::from_fn(|i, j| h[i][j]);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("metric", "entries must be finite"));
    }
    let scale = m.abs().max();
    for i in 0..3 {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::param("metric", format!("not symmetric at ({i}, {j})")));
            }
        }
    }
    if m.cholesky().is_none() {
        return Err(Error::NotPositiveDefinite("spatial metric".into()));
    }
    Ok(m)
}

/// Supermetric at the spatial metric `h`:
/// lower `½(h_ik h_jl + h_il h_jk − h_ij h_kl)`,
/// upper `½(h^ik h^jl + h^il h^jk − 2 h^ij h^kl)`.
pub fn dewitt_supermetric(h: &[[f64; 3]; 3]) -> Result<SuperMetricSample> {
    let m = check_spd(h)?;
    let inv = m.try_inverse().ok_or_else(|| Error::NotPositiveDefinite("spatial metric".into()))?;
    let mut lower = [[[[0.0; 3]; 3]; 3]; 3];
    let mut upper = [[[[0.0; 3]; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    lower[i][j][k][l] = 0.5 * (m[(i, k)] * m[(j, l)] + m[(i, l)] * m[(j, k)] - m[(i, j)] * m[(k, l)]);
                    upper[i][j][k][l] =
                        0.5 * (inv[(i, k)] * inv[(j, l)] + inv[(i, l)] * inv[(j, k)] - 2.0 * inv[(i, j)] * inv[(k, l)]);
                }
            }
        }
    }
    Ok(SuperMetricSample {
        metric: *h,
        lower,
        upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ID: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

    #[test]
    fn identity_metric_components() {
        let g = dewitt_supermetric(&ID).unwrap();
        assert_eq!(g.lower[0][1][0][1], 0.5);
        assert_eq!(g.lower[0][0][1][1], -0.5);
        assert_eq!(g.lower[0][0][0][0], 0.5);
        assert_eq!(g.identity_residual(), 0.0);
    }

    #[test]
    fn rejects_bad_metrics() {
        let mut asym = ID;
        asym[0][1] = 0.3;
        assert!(dewitt_supermetric(&asym).is_err());
        let mut neg = ID;
        neg[2][2] = -1.0;
        assert!(matches!(dewitt_supermetric(&neg), Err(Error::NotPositiveDefinite(_))));
    }

    fn spd(entries: [f64; 9]) -> [[f64; 3]; 3] {
        let a = Matrix3::from_row_slice(&entries);
        let m = a * a.transpose() + Matrix3::identity() * 0.5;
        let mut h = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                h[i][j] = m[(i, j)];
            }
        }
        h
    }

    proptest! {
        #[test]
        fn pair_symmetry_and_contraction(entries in prop::array::uniform9(-2.0f64..2.0)) {
            let h = spd(entries);
            let g = dewitt_supermetric(&h).unwrap();
            for i in 0..3 { for j in 0..3 { for k in 0..3 { for l in 0..3 {
                prop_assert_eq!(g.lower[i][j][k][l], g.lower[k][l][i][j]);
                prop_assert_eq!(g.upper[i][j][k][l], g.upper[k][l][i][j]);
            }}}}
            prop_assert!(g.identity_residual() < 1e-10);
        }
    }
}
