//! Tensor-product rectangular grids and the finite-difference stencils used
//! on them.
//!
//! Nodes are stored axis-major: the first axis varies slowest. All
//! derivative stencils are second order, central in the interior and
//! one-sided on non-periodic boundaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;

/// One coordinate direction of a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub periodic: bool,
}

impl Axis {
    pub fn new(name: impl Into<String>, min: f64, max: f64, points: usize) -> Result<Self> {
        let axis = Axis {
            name: name.into(),
            min,
            max,
            points,
            periodic: false,
        };
        axis.validate()?;
        Ok(axis)
    }

    /// Periodic axis on `[min, max)`; the endpoint `max` is identified with `min`.
    pub fn periodic(name: impl Into<String>, min: f64, max: f64, points: usize) -> Result<Self> {
        let axis = Axis {
            name: name.into(),
            min,
            max,
            points,
            periodic: true,
        };
        axis.validate()?;
        Ok(axis)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::param("axis", format!("{}: bounds must be finite", self.name)));
        }
        if self.max <= self.min {
            return Err(Error::param(
                "axis",
                format!("{}: max {} must exceed min {}", self.name, self.max, self.min),
            ));
        }
        if self.points < 3 {
            return Err(Error::param(
                "axis",
                format!("{}: at least 3 points required, got {}", self.name, self.points),
            ));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        if self.periodic {
            (self.max - self.min) / self.points as f64
        } else {
            (self.max - self.min) / (self.points - 1) as f64
        }
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.min + i as f64 * self.spacing()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.coord(i)).collect()
    }

    /// Same extent with the spacing scaled by 1/2 (for refinement studies).
    pub fn refined(&self) -> Axis {
        let points = if self.periodic {
            self.points * 2
        } else {
            2 * self.points - 1
        };
        Axis {
            points,
            ..self.clone()
        }
    }
}

/// Rectangular tensor-product grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Axis>", into = "Vec<Axis>")]
pub struct Grid {
    axes: Vec<Axis>,
    strides: Vec<usize>,
    len: usize,
}

impl TryFrom<Vec<Axis>> for Grid {
    type Error = Error;
    fn try_from(axes: Vec<Axis>) -> Result<Self> {
        Grid::new(axes)
    }
}

impl From<Grid> for Vec<Axis> {
    fn from(g: Grid) -> Self {
        g.axes
    }
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::param("axes", "a grid needs at least one axis"));
        }
        for a in &axes {
            a.validate()?;
        }
        let mut strides = vec![1; axes.len()];
        for k in (0..axes.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * axes[k + 1].points;
        }
        let len = strides[0] * axes[0].points;
        Ok(Grid { axes, strides, len })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    pub fn stride(&self, k: usize) -> usize {
        self.strides[k]
    }

    /// Index of `flat` along axis `k`.
    #[inline]
    pub fn index_along(&self, flat: usize, k: usize) -> usize {
        (flat / self.strides[k]) % self.axes[k].points
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.dim()];
        self.point_into(flat, &mut p);
        p
    }

    pub fn point_into(&self, flat: usize, out: &mut [f64]) {
        for (k, a) in self.axes.iter().enumerate() {
            out[k] = a.coord(self.index_along(flat, k));
        }
    }

    /// Neighbour of `flat` shifted by `offset` along axis `k`.
    #[inline]
    pub fn neighbor(&self, flat: usize, k: usize, offset: isize) -> Option<usize> {
        let n = self.axes[k].points as isize;
        let i = self.index_along(flat, k) as isize;
        let j = i + offset;
        let j = if self.axes[k].periodic {
            j.rem_euclid(n)
        } else if j < 0 || j >= n {
            return None;
        } else {
            j
        };
        Some((flat as isize + (j - i) * self.strides[k] as isize) as usize)
    }

    /// True when the node touches a non-periodic boundary.
    pub fn on_boundary(&self, flat: usize) -> bool {
        self.axes.iter().enumerate().any(|(k, a)| {
            if a.periodic {
                return false;
            }
            let i = self.index_along(flat, k);
            i == 0 || i + 1 == a.points
        })
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.len).filter(|&f| !self.on_boundary(f)).collect()
    }

    /// Flat-measure cell volume (product of spacings).
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).product()
    }

    /// Flat grid quadrature of nodal values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len);
        pairwise_sum(values) * self.cell_volume()
    }

    /// Quadrature of values attached to any subset of nodes.
    pub fn integrate_subset(&self, values: &[f64]) -> f64 {
        pairwise_sum(values) * self.cell_volume()
    }

    /// Same grid with every axis refined by a factor two.
    pub fn refined(&self) -> Grid {
        Grid::new(self.axes.iter().map(Axis::refined).collect()).expect("refined grid is valid")
    }

    /// First-derivative stencil `(node, weight)` at `flat` along axis `k`.
    #[inline]
    pub fn derivative_stencil(&self, flat: usize, k: usize) -> [(usize, f64); 3] {
        let a = &self.axes[k];
        let inv = 1.0 / (2.0 * a.spacing());
        let i = self.index_along(flat, k);
        let s = self.strides[k];
        if a.periodic || (i > 0 && i + 1 < a.points) {
            let p = self.neighbor(flat, k, 1).unwrap();
            let m = self.neighbor(flat, k, -1).unwrap();
            [(p, inv), (m, -inv), (flat, 0.0)]
        } else if i == 0 {
            [(flat, -3.0 * inv), (flat + s, 4.0 * inv), (flat + 2 * s, -inv)]
        } else {
            [(flat, 3.0 * inv), (flat - s, -4.0 * inv), (flat - 2 * s, inv)]
        }
    }

    /// First derivative along axis `k`.
    pub fn derivative(&self, values: &[f64], k: usize) -> Vec<f64> {
        (0..self.len)
            .map(|f| {
                self.derivative_stencil(f, k)
                    .iter()
                    .map(|&(j, w)| w * values[j])
                    .sum()
            })
            .collect()
    }

    /// Transpose of [`Grid::derivative`] applied to `values`.
    pub fn derivative_transpose(&self, values: &[f64], k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        for f in 0..self.len {
            for (j, w) in self.derivative_stencil(f, k) {
                out[j] += w * values[f];
            }
        }
        out
    }

    /// Second derivative along axis `k`.
    pub fn second_derivative(&self, values: &[f64], k: usize) -> Vec<f64> {
        let h = self.axes[k].spacing();
        let h2 = h * h;
        let n = self.axes[k].points;
        let periodic = self.axes[k].periodic;
        let s = self.strides[k];
        (0..self.len)
            .map(|f| {
                let i = self.index_along(f, k);
                if periodic || (i > 0 && i + 1 < n) {
                    let p = self.neighbor(f, k, 1).unwrap();
                    let m = self.neighbor(f, k, -1).unwrap();
                    (values[p] - 2.0 * values[f] + values[m]) / h2
                } else if n >= 4 {
                    let (a, b, c, d) = if i == 0 {
                        (f, f + s, f + 2 * s, f + 3 * s)
                    } else {
                        (f, f - s, f - 2 * s, f - 3 * s)
                    };
                    (2.0 * values[a] - 5.0 * values[b] + 4.0 * values[c] - values[d]) / h2
                } else {
                    let (a, b, c) = if i == 0 {
                        (f, f + s, f + 2 * s)
                    } else {
                        (f, f - s, f - 2 * s)
                    };
                    (values[a] - 2.0 * values[b] + values[c]) / h2
                }
            })
            .collect()
    }

    /// `d/dx_k (c d f/dx_k)` in expanded form `c f'' + c' f'`, with `c'`
    /// taken from central differences of the nodal coefficient.
    pub fn divergence_expanded(&self, coeff: &[f64], values: &[f64], k: usize) -> Vec<f64> {
        let d2 = self.second_derivative(values, k);
        let d1 = self.derivative(values, k);
        let dc = self.derivative(coeff, k);
        (0..self.len)
            .map(|f| coeff[f] * d2[f] + dc[f] * d1[f])
            .collect()
    }

    /// Tensor-product four-point Lagrange interpolation.
    ///
    /// Returns `None` when the point lies outside a non-periodic axis.
    pub fn interpolate_cubic(&self, values: &[f64], point: &[f64]) -> Option<f64> {
        let d = self.dim();
        assert!(d <= 8, "interpolation supports at most 8 axes");
        let mut weights = [[0.0f64; 4]; 8];
        let mut idx = [[0usize; 4]; 8];
        let mut width = [4usize; 8];
        for k in 0..d {
            let a = &self.axes[k];
            let n = a.points as isize;
            let x = (point[k] - a.min) / a.spacing();
            if !a.periodic && (x < -1e-12 || x > (n - 1) as f64 + 1e-12) {
                return None;
            }
            let npts = if a.periodic { 4 } else { a.points.min(4) };
            let start = if a.periodic {
                x.floor() as isize - 1
            } else {
                (x.floor() as isize - 1).clamp(0, n - npts as isize)
            };
            let t = x - start as f64;
            width[k] = npts;
            for m in 0..npts {
                let mut w = 1.0;
                for q in 0..npts {
                    if q != m {
                        w *= (t - q as f64) / (m as f64 - q as f64);
                    }
                }
                weights[k][m] = w;
                let j = start + m as isize;
                idx[k][m] = if a.periodic {
                    j.rem_euclid(n) as usize
                } else {
                    j as usize
                };
            }
        }
        let combos: usize = width[..d].iter().product();
        let mut total = 0.0;
        for c in 0..combos {
            let mut w = 1.0;
            let mut flat = 0;
            let mut rem = c;
            for k in (0..d).rev() {
                let m = rem % width[k];
                rem /= width[k];
                w *= weights[k][m];
                flat += idx[k][m] * self.strides[k];
            }
            total += w * values[flat];
        }
        Some(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> Grid {
        Grid::new(vec![Axis::new("x", -1.0, 1.0, n).unwrap()]).unwrap()
    }

    #[test]
    fn rejects_bad_axes() {
        assert!(Axis::new("x", 0.0, 1.0, 2).is_err());
        assert!(Axis::new("x", 1.0, 0.0, 5).is_err());
        assert!(Axis::new("x", 0.0, f64::INFINITY, 5).is_err());
    }

    #[test]
    fn flat_index_roundtrip() {
        let g = Grid::new(vec![
            Axis::new("a", 0.0, 1.0, 4).unwrap(),
            Axis::new("b", 0.0, 1.0, 5).unwrap(),
            Axis::new("c", 0.0, 1.0, 3).unwrap(),
        ])
        .unwrap();
        assert_eq!(g.len(), 60);
        for f in 0..g.len() {
            let idx: Vec<usize> = (0..3).map(|k| g.index_along(f, k)).collect();
            assert_eq!(g.flat_index(&idx), f);
        }
    }

    #[test]
    fn derivatives_exact_on_quadratics() {
        let g = line(11);
        let x = g.axis(0).coords();
        let f: Vec<f64> = x.iter().map(|x| 3.0 * x * x - x + 2.0).collect();
        let d = g.derivative(&f, 0);
        let d2 = g.second_derivative(&f, 0);
        for (i, xi) in x.iter().enumerate() {
            assert!((d[i] - (6.0 * xi - 1.0)).abs() < 1e-12);
            assert!((d2[i] - 6.0).abs() < 1e-10);
        }
    }

    #[test]
    fn periodic_derivative_wraps() {
        let g = Grid::new(vec![Axis::periodic("x", 0.0, 1.0, 64).unwrap()]).unwrap();
        let x = g.axis(0).coords();
        let tau = std::f64::consts::TAU;
        let f: Vec<f64> = x.iter().map(|x| (tau * x).sin()).collect();
        let d = g.derivative(&f, 0);
        let err = x
            .iter()
            .zip(&d)
            .map(|(x, d)| (d - tau * (tau * x).cos()).abs())
            .fold(0.0, f64::max);
        assert!(err < 0.1, "{err}");
    }

    #[test]
    fn cubic_interpolation_exact_for_cubics() {
        let g = Grid::new(vec![
            Axis::new("a", 0.0, 2.0, 9).unwrap(),
            Axis::new("b", -1.0, 1.0, 7).unwrap(),
        ])
        .unwrap();
        let poly = |a: f64, b: f64| a * a * a - 2.0 * a * b + b * b * b + 1.0;
        let vals: Vec<f64> = (0..g.len())
            .map(|f| {
                let p = g.point(f);
                poly(p[0], p[1])
            })
            .collect();
        for &(a, b) in &[(0.1, 0.3), (1.93, -0.97), (1.0, 0.0), (0.0, -1.0)] {
            let v = g.interpolate_cubic(&vals, &[a, b]).unwrap();
            assert!((v - poly(a, b)).abs() < 1e-12, "{a} {b}");
        }
        assert!(g.interpolate_cubic(&vals, &[2.5, 0.0]).is_none());
    }

    #[test]
    fn integrate_uses_flat_measure() {
        let g = Grid::new(vec![
            Axis::periodic("a", 0.0, 2.0, 10).unwrap(),
            Axis::periodic("b", 0.0, 3.0, 10).unwrap(),
        ])
        .unwrap();
        let ones = vec![1.0; g.len()];
        assert!((g.integrate(&ones) - 6.0).abs() < 1e-12);
    }
}
