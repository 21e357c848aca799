//! Brute-force references for small instances.
//!
//! These solve the cardinality-penalized problem
//! `psi = max { x^T S x - lambda * ||x||_0 : ||x||_2 = 1 }` exactly by
//! enumerating supports, and evaluate its variational identity
//! `psi = max over unit xi of sum_i ((a_i^T xi)^2 - lambda)_+` on a grid for
//! two-row data matrices. They exist to validate the relaxation solver and
//! the screening rule; keep them independent of the solver code paths.

use alloc::vec::Vec;

use crate::fmath;
use crate::mat::{jacobi_eigen, SymMat};
use crate::{Error, Result};

/// Hard cap on enumeration order (2^n supports).
pub const MAX_BRUTE_FORCE_ORDER: usize = 20;

/// Exact solution of the cardinality-penalized problem on a small instance.
#[derive(Debug, Clone)]
pub struct CardSolution {
    /// Optimal value `lambda_max(S_supp) - lambda * |supp|`.
    pub psi: f64,
    /// Maximizing support, ascending matrix indices.
    pub support: Vec<usize>,
    /// Unit eigenvector on the support, aligned with `support`.
    pub x: Vec<f64>,
}

/// Enumerates every nonempty support and returns the maximizer of
/// `lambda_max(S_supp) - lambda * |supp|`. Ties prefer smaller supports,
/// then lexicographically smaller index lists.
pub fn brute_force_card(sigma: &SymMat, lambda: f64) -> Result<CardSolution> {
    let n = sigma.order();
    if n == 0 {
        return Err(Error::InvalidInput("empty matrix"));
    }
    if n > MAX_BRUTE_FORCE_ORDER {
        return Err(Error::ProblemTooLarge {
            n,
            limit: MAX_BRUTE_FORCE_ORDER,
        });
    }

    let mut best: Option<CardSolution> = None;
    for mask in 1u32..(1u32 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let sub = sigma.principal_submatrix(&support);
        let eig = jacobi_eigen(&sub);
        let (lam_max, vec_max) = eig.largest();
        let psi = lam_max - lambda * support.len() as f64;
        let candidate_better = match &best {
            None => true,
            Some(b) => {
                let tie = (psi - b.psi).abs() <= 1e-12 * (1.0 + b.psi.abs());
                if tie {
                    support.len() < b.support.len()
                        || (support.len() == b.support.len() && support < b.support)
                } else {
                    psi > b.psi
                }
            }
        };
        if candidate_better {
            best = Some(CardSolution {
                psi,
                support,
                x: vec_max.to_vec(),
            });
        }
    }
    Ok(best.expect("at least one support enumerated"))
}

/// Grid evaluation of `max over unit xi in R^2 of sum_i ((a_i^T xi)^2 - lambda)_+`
/// for a 2-row data matrix `a` (rows of length n). The value is a lower bound
/// on the exact maximum, within `O(1/grid_points^2)` of it.
pub fn xi_scan_psi(a: &[Vec<f64>], lambda: f64, grid_points: usize) -> Result<f64> {
    if a.len() != 2 {
        return Err(Error::InvalidInput("xi scan requires exactly 2 rows"));
    }
    if grid_points < 360 {
        return Err(Error::InvalidInput("grid too coarse: need >= 360 points"));
    }
    let n = a[0].len();
    if a[1].len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a[1].len(),
        });
    }
    // (a_i^T xi)^2 is invariant under xi -> -xi, so half a turn suffices.
    let mut best = 0.0f64;
    for g in 0..grid_points {
        let theta = core::f64::consts::PI * g as f64 / grid_points as f64;
        let (c, s) = (fmath::cos(theta), fmath::sin(theta));
        let mut total = 0.0;
        for i in 0..n {
            let proj = a[0][i] * c + a[1][i] * s;
            let gain = proj * proj - lambda;
            if gain > 0.0 {
                total += gain;
            }
        }
        best = best.max(total);
    }
    Ok(best)
}

/// Gram matrix `A^T A` of a data matrix given as rows.
pub fn gram_of_rows(a: &[Vec<f64>]) -> SymMat {
    let n = if a.is_empty() { 0 } else { a[0].len() };
    let mut g = SymMat::zeros(n);
    for i in 0..n {
        for j in i..n {
            let dot: f64 = a.iter().map(|row| row[i] * row[j]).sum();
            g.set_sym(i, j, dot);
        }
    }
    g
}
