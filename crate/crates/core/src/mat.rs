//! Dense symmetric matrices and the small amount of linear algebra the
//! solver needs: Cholesky factorization, cyclic Jacobi eigendecomposition
//! for small orders, and power iteration for the dominant eigenpair.
//!
//! Storage is full row-major; symmetry is maintained by construction (every
//! mutation writes both triangles). Rows double as columns, so `row(i)`
//! hands out a contiguous slice usable for dot products and axpy updates.

use alloc::vec;
use alloc::vec::Vec;

use crate::fmath;
use crate::rng::SplitMix64;
use crate::{Error, Result};

/// Dense symmetric matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat {
    n: usize,
    a: Vec<f64>,
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        SymMat {
            n,
            a: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = SymMat::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row slices, averaging the two triangles.
    /// Fails if the rows do not form a square array.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: r.len(),
                });
            }
        }
        let mut m = SymMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.a[i * n + j] = 0.5 * (rows[i][j] + rows[j][i]);
            }
        }
        Ok(m)
    }

    /// Largest absolute asymmetry of a raw square array, before symmetrization.
    pub fn max_asymmetry(rows: &[Vec<f64>]) -> f64 {
        let n = rows.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((rows[i][j] - rows[j][i]).abs());
            }
        }
        worst
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    /// Writes both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
        self.a[j * self.n + i] = v;
    }

    /// Row `i` as a contiguous slice (equals column `i` by symmetry).
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.n..(i + 1) * self.n]
    }

    /// Raw mutable row access for bulk fills; the caller restores symmetry.
    #[inline]
    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.a[i * self.n..(i + 1) * self.n]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.a[i * self.n + i]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    pub fn min_diag(&self) -> f64 {
        (0..self.n)
            .map(|i| self.a[i * self.n + i])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_diag(&self) -> f64 {
        (0..self.n)
            .map(|i| self.a[i * self.n + i])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sum of absolute values over all entries.
    pub fn l1_norm(&self) -> f64 {
        self.a.iter().map(|v| v.abs()).sum()
    }

    /// Frobenius inner product `sum_ij A_ij B_ij`.
    pub fn frob_dot(&self, other: &SymMat) -> f64 {
        debug_assert_eq!(self.n, other.n);
        self.a.iter().zip(&other.a).map(|(x, y)| x * y).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        fmath::sqrt(self.a.iter().map(|v| v * v).sum())
    }

    /// `out = A x`.
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        for i in 0..self.n {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            out[i] = acc;
        }
    }

    /// `x^T A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            let row = self.row(i);
            let mut ri = 0.0;
            for (a, b) in row.iter().zip(x) {
                ri += a * b;
            }
            acc += x[i] * ri;
        }
        acc
    }

    /// Principal submatrix on the given (distinct) indices, in their order.
    pub fn principal_submatrix(&self, keep: &[usize]) -> SymMat {
        let k = keep.len();
        let mut m = SymMat::zeros(k);
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                m.a[a * k + b] = self.get(i, j);
            }
        }
        m
    }

    pub fn scaled(&self, alpha: f64) -> SymMat {
        SymMat {
            n: self.n,
            a: self.a.iter().map(|v| v * alpha).collect(),
        }
    }

    pub fn scale_in_place(&mut self, alpha: f64) {
        for v in &mut self.a {
            *v *= alpha;
        }
    }

    /// Lower-triangular Cholesky factor; `Err(column)` reports the first
    /// non-positive pivot. Success certifies positive definiteness.
    pub fn cholesky(&self) -> core::result::Result<Vec<f64>, usize> {
        let n = self.n;
        let mut l = vec![0.0f64; n * n];
        for j in 0..n {
            let mut d = self.a[j * n + j];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(j);
            }
            let dj = fmath::sqrt(d);
            l[j * n + j] = dj;
            for i in (j + 1)..n {
                let mut v = self.a[i * n + j];
                for k in 0..j {
                    v -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = v / dj;
            }
        }
        Ok(l)
    }

    /// `log det` via Cholesky; `Err(column)` if not positive definite.
    pub fn log_det(&self) -> core::result::Result<f64, usize> {
        let l = self.cholesky()?;
        let n = self.n;
        let mut acc = 0.0;
        for j in 0..n {
            acc += fmath::ln(l[j * n + j]);
        }
        Ok(2.0 * acc)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.cholesky().is_ok()
    }
}

/// Eigendecomposition of a small symmetric matrix.
#[derive(Debug, Clone)]
pub struct Eigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Unit eigenvectors, `vectors[k]` matching `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

impl Eigen {
    pub fn largest(&self) -> (f64, &[f64]) {
        let k = self.values.len() - 1;
        (self.values[k], &self.vectors[k])
    }
}

/// Full eigendecomposition by cyclic Jacobi rotations. Intended for the
/// small orders the brute-force references work at; cost is O(n^3) per
/// sweep with quadratic convergence once nearly diagonal.
pub fn jacobi_eigen(m: &SymMat) -> Eigen {
    let n = m.order();
    let mut a = m.clone();
    let mut v = SymMat::identity(n); // columns accumulate the rotations
    if n == 0 {
        return Eigen {
            values: Vec::new(),
            vectors: Vec::new(),
        };
    }

    let scale = a.max_abs().max(1e-300);
    let tol = 1e-15 * scale;
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a.get(p, q).abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() < 1e154 {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + fmath::sqrt(1.0 + theta * theta))
                } else {
                    0.5 / theta
                };
                let c = 1.0 / fmath::sqrt(1.0 + t * t);
                let s = t * c;
                let tau = s / (1.0 + c);

                a.set_sym(p, p, app - t * apq);
                a.set_sym(q, q, aqq + t * apq);
                a.set_sym(p, q, 0.0);
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set_sym(k, p, akp - s * (akq + tau * akp));
                    a.set_sym(k, q, akq + s * (akp - tau * akq));
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.a[k * n + p] = vkp - s * (vkq + tau * vkp);
                    v.a[k * n + q] = vkq + s * (vkp - tau * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a.get(i, i)
            .partial_cmp(&a.get(j, j))
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| a.get(i, i)).collect();
    let vectors = order
        .iter()
        .map(|&c| (0..n).map(|r| v.get(r, c)).collect())
        .collect();
    Eigen { values, vectors }
}

const POWER_MAX_ITERS: usize = 5_000;
const POWER_RESTARTS: usize = 6;

/// Dominant eigenpair of a positive-semidefinite matrix by power iteration.
///
/// Returns `(theta, v)` with `||A v - theta v|| <= tol * theta` when the
/// iteration converged; for the zero matrix the convention is `(0, e1)`.
/// Restarts from seeded pseudo-random vectors guard against a start vector
/// orthogonal to the dominant eigenspace.
pub fn dominant_eigenpair(m: &SymMat, tol: f64) -> (f64, Vec<f64>) {
    let n = m.order();
    debug_assert!(n >= 1);
    let mut e1 = vec![0.0; n];
    e1[0] = 1.0;
    if m.max_abs() == 0.0 {
        return (0.0, e1);
    }

    let mut best: Option<(f64, Vec<f64>, f64)> = None; // (theta, v, residual)
    let mut rng = SplitMix64::new(0x9e37_79b9_7f4a_7c15);
    let mut w = vec![0.0; n];
    for restart in 0..POWER_RESTARTS {
        let mut v: Vec<f64> = if restart == 0 {
            vec![1.0; n]
        } else {
            (0..n).map(|_| rng.next_f64() - 0.5).collect()
        };
        let norm = fmath::norm2(&v);
        if norm == 0.0 {
            continue;
        }
        for x in &mut v {
            *x /= norm;
        }

        for _ in 0..POWER_MAX_ITERS {
            m.matvec(&v, &mut w);
            let theta: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
            let mut res2 = 0.0;
            for i in 0..n {
                let r = w[i] - theta * v[i];
                res2 += r * r;
            }
            let res = fmath::sqrt(res2);
            if theta > 0.0 {
                match &best {
                    Some((_, _, r)) if *r <= res => {}
                    _ => best = Some((theta, v.clone(), res)),
                }
                if res <= tol * theta {
                    return (theta, v);
                }
            }
            let wn = fmath::norm2(&w);
            if wn == 0.0 {
                break; // v is in the null space; restart elsewhere
            }
            for i in 0..n {
                v[i] = w[i] / wn;
            }
        }
    }
    match best {
        Some((theta, v, _)) => (theta, v),
        None => (0.0, e1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> SymMat {
        SymMat::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn cholesky_log_det_identity() {
        let m = SymMat::identity(4);
        assert_eq!(m.log_det().unwrap(), 0.0);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = mat(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(m.log_det().is_err());
    }

    #[test]
    fn jacobi_two_by_two_closed_form() {
        let m = mat(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let e = jacobi_eigen(&m);
        assert!((e.values[0] - 1.0).abs() < 1e-12);
        assert!((e.values[1] - 3.0).abs() < 1e-12);
        let (_, v) = e.largest();
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        assert!((v[0].abs() - inv_sqrt2).abs() < 1e-12);
        assert!((v[1].abs() - inv_sqrt2).abs() < 1e-12);
    }

    #[test]
    fn jacobi_reconstructs_matrix() {
        let mut rng = SplitMix64::new(7);
        for _ in 0..20 {
            let n = 2 + (rng.next_u64() % 7) as usize;
            let mut m = SymMat::zeros(n);
            for i in 0..n {
                for j in i..n {
                    m.set_sym(i, j, rng.next_f64() * 2.0 - 1.0);
                }
            }
            let e = jacobi_eigen(&m);
            // check A v = lambda v for every pair
            for (k, lam) in e.values.iter().enumerate() {
                let v = &e.vectors[k];
                let mut av = vec![0.0; n];
                m.matvec(v, &mut av);
                for i in 0..n {
                    assert!(
                        (av[i] - lam * v[i]).abs() < 1e-9 * (1.0 + m.max_abs()),
                        "residual too large"
                    );
                }
            }
        }
    }

    #[test]
    fn power_iteration_diag() {
        let m = mat(&[&[3.0, 0.0], &[0.0, 1.0]]);
        let (theta, v) = dominant_eigenpair(&m, 1e-12);
        assert!((theta - 3.0).abs() < 1e-9);
        assert!(v[0].abs() > 0.999_999);
    }

    #[test]
    fn power_iteration_zero_matrix() {
        let m = SymMat::zeros(3);
        let (theta, v) = dominant_eigenpair(&m, 1e-10);
        assert_eq!(theta, 0.0);
        assert_eq!(v, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn power_iteration_matches_jacobi() {
        let mut rng = SplitMix64::new(42);
        for _ in 0..10 {
            let n = 8;
            // PSD Gram matrix
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.next_f64() - 0.5).collect())
                .collect();
            let mut g = SymMat::zeros(n);
            for i in 0..n {
                for j in i..n {
                    let dot: f64 = (0..n).map(|k| rows[k][i] * rows[k][j]).sum();
                    g.set_sym(i, j, dot);
                }
            }
            let exact = jacobi_eigen(&g).values[n - 1];
            let (theta, _) = dominant_eigenpair(&g, 1e-10);
            assert!(
                (theta - exact).abs() <= 1e-8 * exact.max(1.0),
                "power {theta} vs jacobi {exact}"
            );
        }
    }
}
