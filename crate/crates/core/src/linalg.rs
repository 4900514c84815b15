//! Sparse storage and the small set of linear solvers the pipelines need.

use num_complex::{Complex64, ComplexFloat};

use crate::error::{Error, Result};

const PAIRWISE_BLOCK: usize = 64;

/// Sum with a fixed binary-tree order, so results do not depend on how the
/// caller split the work.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    pairwise_sum(&prod)
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn cnorm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    pub rows: usize,
    pub cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Assemble from (row, col, value) triplets; duplicates are summed and
    /// explicit zeros dropped.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut row_of = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_of.push(r);
                last = Some((r, c));
            }
        }
        let keep: Vec<bool> = values.iter().map(|v| *v != 0.0).collect();
        let mut ci = Vec::new();
        let mut vs = Vec::new();
        for i in 0..values.len() {
            if keep[i] {
                row_ptr[row_of[i] + 1] += 1;
                ci.push(col_idx[i]);
                vs.push(values[i]);
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Csr {
            rows,
            cols,
            row_ptr,
            col_idx: ci,
            values: vs,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(j, _)| j == c).map_or(0.0, |(_, v)| v)
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.rows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn matvec_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.rows)
            .map(|r| self.row(r).map(|(c, v)| x[c] * v).sum())
            .collect()
    }

    pub fn transpose(&self) -> Csr {
        let t = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        Csr::from_triplets(self.cols, self.rows, t)
    }

    /// `a * self + b * other`, entrywise on the union pattern.
    pub fn combine(&self, a: f64, other: &Csr, b: f64) -> Csr {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut t: Vec<_> = self
            .triplets()
            .into_iter()
            .map(|(r, c, v)| (r, c, a * v))
            .collect();
        t.extend(other.triplets().into_iter().map(|(r, c, v)| (r, c, b * v)));
        Csr::from_triplets(self.rows, self.cols, t)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    /// Tridiagonal bands `(sub, diag, sup)`; fails if any entry lies off them.
    pub fn tridiagonal_bands(&self) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let n = self.rows;
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        for (r, c, v) in self.triplets() {
            match c as isize - r as isize {
                -1 => sub[r] = v,
                0 => diag[r] = v,
                1 => sup[r] = v,
                _ => return None,
            }
        }
        Some((sub, diag, sup))
    }
}

/// Solve a tridiagonal system. `sub[0]` and `sup[n-1]` are ignored.
///
/// Returns `IllPosed` when a pivot collapses relative to the row scale.
pub fn thomas<T>(sub: &[T], diag: &[T], sup: &[T], rhs: &[T]) -> Result<Vec<T>>
where
    T: ComplexFloat<Real = f64>,
{
    let n = diag.len();
    if sub.len() != n || sup.len() != n || rhs.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            got: rhs.len().min(sub.len()).min(sup.len()),
        });
    }
    let mut c = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    let mut pivot = diag[0];
    for i in 0..n {
        if i > 0 {
            pivot = diag[i] - sub[i] * c[i - 1];
        }
        let scale = diag[i].abs() + sub[i].abs() + sup[i].abs();
        if pivot.abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::IllPosed(format!(
                "tridiagonal pivot {:.3e} vanishes at row {i}",
                pivot.abs()
            )));
        }
        c[i] = sup[i] / pivot;
        d[i] = if i == 0 {
            rhs[0] / pivot
        } else {
            (rhs[i] - sub[i] * d[i - 1]) / pivot
        };
    }
    let mut x = d;
    for i in (0..n.saturating_sub(1)).rev() {
        let next = x[i + 1];
        x[i] = x[i] - c[i] * next;
    }
    Ok(x)
}

/// Outcome of an iterative solve.
#[derive(Clone, Debug)]
pub struct Solve<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub residual: f64,
}

/// Conjugate gradients for a symmetric positive-definite operator given as
/// `apply(x, out)`. `tol` is relative to `‖b‖`.
pub fn conjugate_gradient<F>(
    apply: F,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<Solve<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = norm2(b).max(f64::MIN_POSITIVE);
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        if rr.sqrt() <= tol * bnorm {
            return Ok(Solve {
                x,
                iterations: it,
                residual: rr.sqrt() / bnorm,
            });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NotPositiveDefinite(format!(
                "conjugate gradient met p·Ap = {pap:.3e}"
            )));
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    if rr.sqrt() <= tol * bnorm {
        return Ok(Solve {
            x,
            iterations: max_iter,
            residual: rr.sqrt() / bnorm,
        });
    }
    Err(Error::NoConvergence {
        method: "conjugate gradient",
        iterations: max_iter,
        residual: rr.sqrt() / bnorm,
    })
}

/// BiCGSTAB for a general complex operator.
pub fn bicgstab<F>(
    apply: F,
    b: &[Complex64],
    x0: Option<&[Complex64]>,
    tol: f64,
    max_iter: usize,
) -> Result<Solve<Complex64>>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    let n = b.len();
    let zero = Complex64::new(0.0, 0.0);
    let bnorm = cnorm(b).max(f64::MIN_POSITIVE);
    let mut x = x0.map_or_else(|| vec![zero; n], <[Complex64]>::to_vec);
    let mut tmp = vec![zero; n];
    apply(&x, &mut tmp);
    let mut r: Vec<Complex64> = b.iter().zip(&tmp).map(|(b, a)| b - a).collect();
    let r_hat = r.clone();
    let mut rho = Complex64::new(1.0, 0.0);
    let mut alpha = Complex64::new(1.0, 0.0);
    let mut omega = Complex64::new(1.0, 0.0);
    let mut v = vec![zero; n];
    let mut p = vec![zero; n];
    let mut s = vec![zero; n];
    let mut t = vec![zero; n];
    let mut res = cnorm(&r) / bnorm;
    for it in 0..max_iter {
        if res <= tol {
            return Ok(Solve {
                x,
                iterations: it,
                residual: res,
            });
        }
        let rho_new = cdot(&r_hat, &r);
        if rho_new.norm() == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        apply(&p, &mut v);
        alpha = rho / cdot(&r_hat, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if cnorm(&s) / bnorm <= tol {
            for i in 0..n {
                x[i] += alpha * p[i];
            }
            return Ok(Solve {
                x,
                iterations: it + 1,
                residual: cnorm(&s) / bnorm,
            });
        }
        apply(&s, &mut t);
        let tt = cdot(&t, &t);
        omega = if tt.norm() == 0.0 { zero } else { cdot(&t, &s) / tt };
        for i in 0..n {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        res = cnorm(&r) / bnorm;
        if omega.norm() == 0.0 {
            break;
        }
    }
    if res <= tol {
        return Ok(Solve {
            x,
            iterations: max_iter,
            residual: res,
        });
    }
    Err(Error::NoConvergence {
        method: "BiCGSTAB",
        iterations: max_iter,
        residual: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64 * 0.5).collect();
        assert_eq!(pairwise_sum(&v), v.iter().sum::<f64>());
    }

    #[test]
    fn csr_combines_duplicates_and_transposes() {
        let m = Csr::from_triplets(2, 3, vec![(0, 1, 1.0), (0, 1, 2.0), (1, 2, -1.0), (1, 0, 0.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), 3.0);
        let t = m.transpose();
        assert_eq!(t.get(1, 0), 3.0);
        assert_eq!(t.get(2, 1), -1.0);
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]), vec![3.0, -1.0]);
    }

    #[test]
    fn thomas_solves_real_and_complex() {
        let n = 20;
        let sub = vec![-1.0; n];
        let diag = vec![2.5; n];
        let sup = vec![-1.0; n];
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = diag[i] * x_true[i];
            if i > 0 {
                rhs[i] += sub[i] * x_true[i - 1];
            }
            if i + 1 < n {
                rhs[i] += sup[i] * x_true[i + 1];
            }
        }
        let x = thomas(&sub, &diag, &sup, &rhs).unwrap();
        for i in 0..n {
            assert!((x[i] - x_true[i]).abs() < 1e-12);
        }
        let i = Complex64::new(0.0, 1.0);
        let csub: Vec<Complex64> = sub.iter().map(|&v| i * v).collect();
        let cdiag: Vec<Complex64> = diag.iter().map(|&v| 1.0 + i * v).collect();
        let crhs: Vec<Complex64> = rhs.iter().map(|&v| Complex64::new(v, -v)).collect();
        let z = thomas(&csub, &cdiag, &csub, &crhs).unwrap();
        for k in 0..n {
            let mut back = cdiag[k] * z[k];
            if k > 0 {
                back += csub[k] * z[k - 1];
            }
            if k + 1 < n {
                back += csub[k] * z[k + 1];
            }
            assert!((back - crhs[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn thomas_flags_singular_pivot() {
        let r = thomas(&[0.0, 1.0], &[1.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]);
        assert!(matches!(r, Err(Error::IllPosed(_))));
    }

    #[test]
    fn cg_and_bicgstab_agree_with_direct() {
        let n = 50;
        let apply = |x: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let mut v = 3.0 * x[i];
                if i > 0 {
                    v -= x[i - 1];
                }
                if i + 1 < n {
                    v -= x[i + 1];
                }
                out[i] = v;
            }
        };
        let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 / n as f64).collect();
        let cg = conjugate_gradient(apply, &b, None, 1e-13, 500).unwrap();
        let direct = thomas(&vec![-1.0; n], &vec![3.0; n], &vec![-1.0; n], &b).unwrap();
        for i in 0..n {
            assert!((cg.x[i] - direct[i]).abs() < 1e-10);
        }
        let capply = |x: &[Complex64], out: &mut [Complex64]| {
            let re: Vec<f64> = x.iter().map(|z| z.re).collect();
            let im: Vec<f64> = x.iter().map(|z| z.im).collect();
            let mut ar = vec![0.0; n];
            let mut ai = vec![0.0; n];
            apply(&re, &mut ar);
            apply(&im, &mut ai);
            for i in 0..n {
                out[i] = x[i] + Complex64::new(0.0, 0.1) * Complex64::new(ar[i], ai[i]);
            }
        };
        let cb: Vec<Complex64> = b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let sol = bicgstab(capply, &cb, None, 1e-13, 500).unwrap();
        let mut back = vec![Complex64::new(0.0, 0.0); n];
        capply(&sol.x, &mut back);
        for i in 0..n {
            assert!((back[i] - cb[i]).norm() < 1e-10);
        }
    }
}
