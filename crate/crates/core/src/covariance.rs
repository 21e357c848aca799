//! Reduced covariance matrices and synthetic covariance models.
//!
//! [`GramAccumulator`] assembles the centered sample covariance of a kept
//! feature subset from streamed documents: one outer-product update per
//! document over that document's kept entries, so a full pass costs
//! `O(sum_d nnz_kept(d)^2)` and never materializes the full-order matrix.
//! Accumulators merge associatively, which is what makes sharded corpus
//! passes equal the sequential pass.
//!
//! The covariance convention throughout is centered with a `1/m`
//! normalization over all `m` documents (absent entries count as zero).

use alloc::vec;
use alloc::vec::Vec;

use crate::fmath;
use crate::mat::{self, SymMat};
use crate::rng::SplitMix64;
use crate::{Error, Result};

/// Dense symmetric covariance over a reduced feature set, remembering which
/// original feature each row/column came from.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    values: SymMat,
    feature_ids: Vec<u32>,
    sample_count: u64,
}

impl CovarianceMatrix {
    /// Wraps a symmetric matrix; ids must be distinct and match the order,
    /// and the diagonal must be nonnegative. `sample_count` is 0 for
    /// synthetic matrices.
    pub fn new(values: SymMat, feature_ids: Vec<u32>, sample_count: u64) -> Result<Self> {
        if feature_ids.len() != values.order() {
            return Err(Error::DimensionMismatch {
                expected: values.order(),
                got: feature_ids.len(),
            });
        }
        let mut sorted = feature_ids.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("duplicate feature ids"));
        }
        for i in 0..values.order() {
            if values.get(i, i) < 0.0 {
                return Err(Error::InvalidInput("negative diagonal entry"));
            }
        }
        Ok(CovarianceMatrix {
            values,
            feature_ids,
            sample_count,
        })
    }

    /// Synthetic wrapper with ids `1..=n`.
    pub fn synthetic(values: SymMat) -> Result<Self> {
        let n = values.order();
        CovarianceMatrix::new(values, (1..=n as u32).collect(), 0)
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.values.order()
    }

    #[inline]
    pub fn values(&self) -> &SymMat {
        &self.values
    }

    #[inline]
    pub fn feature_ids(&self) -> &[u32] {
        &self.feature_ids
    }

    #[inline]
    pub fn sample_count(&self) -> u64 {
        self.sample_count
    }

    pub fn min_diag(&self) -> f64 {
        self.values.min_diag()
    }

    pub fn max_diag(&self) -> f64 {
        self.values.max_diag()
    }

    /// Restriction to a subset of row/column indices (in the given order),
    /// carrying the feature ids along.
    pub fn restrict(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::EmptyReducedProblem);
        }
        let sub = self.values.principal_submatrix(keep);
        let ids = keep.iter().map(|&i| self.feature_ids[i]).collect();
        CovarianceMatrix::new(sub, ids, self.sample_count)
    }
}

/// Streaming accumulator for the centered Gram matrix of a kept feature set.
///
/// Feed each document's sparse `(feature id, value)` entries; entries for
/// features outside the kept set are ignored. `finalize(m)` divides by the
/// total document count `m` (which may exceed the number of documents fed,
/// since empty documents still count) and subtracts the mean outer product.
#[derive(Debug, Clone)]
pub struct GramAccumulator {
    ids: Vec<u32>,
    // (feature id, reduced index), sorted by id for binary search
    index: Vec<(u32, usize)>,
    sums: Vec<f64>,
    gram: SymMat,
    docs_seen: u64,
    scratch: Vec<(usize, f64)>,
}

impl GramAccumulator {
    pub fn new(kept: &[u32]) -> Result<Self> {
        if kept.is_empty() {
            return Err(Error::EmptyReducedProblem);
        }
        let mut index: Vec<(u32, usize)> = kept.iter().copied().zip(0..).collect();
        index.sort_unstable_by_key(|&(id, _)| id);
        if index.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidInput("duplicate feature ids"));
        }
        let n = kept.len();
        Ok(GramAccumulator {
            ids: kept.to_vec(),
            index,
            sums: vec![0.0; n],
            gram: SymMat::zeros(n),
            docs_seen: 0,
            scratch: Vec::new(),
        })
    }

    pub fn kept_ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn docs_seen(&self) -> u64 {
        self.docs_seen
    }

    /// One document's sparse entries; ids outside the kept set are skipped.
    pub fn add_document(&mut self, entries: &[(u32, f64)]) {
        self.docs_seen += 1;
        self.scratch.clear();
        for &(id, value) in entries {
            if value == 0.0 {
                continue;
            }
            if let Ok(pos) = self.index.binary_search_by_key(&id, |&(i, _)| i) {
                self.scratch.push((self.index[pos].1, value));
            }
        }
        for &(i, vi) in &self.scratch {
            self.sums[i] += vi;
        }
        for a in 0..self.scratch.len() {
            let (i, vi) = self.scratch[a];
            for &(j, vj) in &self.scratch[a..] {
                let prev = self.gram.get(i, j);
                self.gram.set_sym(i, j, prev + vi * vj);
            }
        }
    }

    /// Associative merge of a shard accumulator over the same kept set.
    pub fn merge(&mut self, other: &GramAccumulator) -> Result<()> {
        if other.ids != self.ids {
            return Err(Error::InvalidInput("merging accumulators over different feature sets"));
        }
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
        let n = self.ids.len();
        for i in 0..n {
            for j in i..n {
                let v = self.gram.get(i, j) + other.gram.get(i, j);
                self.gram.set_sym(i, j, v);
            }
        }
        self.docs_seen += other.docs_seen;
        Ok(())
    }

    /// Centered `1/m` covariance over `total_docs` documents.
    pub fn finalize(self, total_docs: u64) -> Result<CovarianceMatrix> {
        if total_docs == 0 {
            return Err(Error::InvalidInput("zero documents"));
        }
        if self.docs_seen > total_docs {
            return Err(Error::InvalidInput("saw more documents than the declared total"));
        }
        let m = total_docs as f64;
        let n = self.ids.len();
        let mut cov = SymMat::zeros(n);
        for i in 0..n {
            let mu_i = self.sums[i] / m;
            for j in i..n {
                let mu_j = self.sums[j] / m;
                let mut v = self.gram.get(i, j) / m - mu_i * mu_j;
                if i == j && v < 0.0 {
                    v = 0.0; // rounding guard for constant features
                }
                cov.set_sym(i, j, v);
            }
        }
        CovarianceMatrix::new(cov, self.ids, total_docs)
    }
}

/// Parameters of the planted sparse-eigenvector covariance
/// `S = u u^T + V V^T / m`, with `u` unit-norm and supported on
/// `round(support_fraction * n)` coordinates of equal magnitude and
/// `V` an `n x m` standard normal noise matrix.
#[derive(Debug, Clone)]
pub struct SpikedModelSpec {
    pub n: usize,
    pub m: usize,
    pub support_fraction: f64,
    pub noise_seed: u64,
    /// Drop the noise term entirely (the infinite-sample limit `S = u u^T`).
    pub noise_free: bool,
}

impl SpikedModelSpec {
    pub fn new(n: usize, m: usize, support_fraction: f64, noise_seed: u64) -> Self {
        SpikedModelSpec {
            n,
            m,
            support_fraction,
            noise_seed,
            noise_free: false,
        }
    }
}

/// A generated spiked-model instance.
#[derive(Debug, Clone)]
pub struct SpikedModel {
    pub covariance: CovarianceMatrix,
    /// Planted support, ascending 0-based indices.
    pub true_support: Vec<usize>,
    /// The planted unit eigenvector `u`.
    pub leading: Vec<f64>,
}

pub fn spiked_model(spec: &SpikedModelSpec) -> Result<SpikedModel> {
    if spec.n < 2 {
        return Err(Error::InvalidInput("spiked model needs n >= 2"));
    }
    if spec.m < 1 {
        return Err(Error::InvalidInput("spiked model needs m >= 1"));
    }
    if !(spec.support_fraction > 0.0 && spec.support_fraction <= 1.0) {
        return Err(Error::InvalidInput("support fraction must lie in (0, 1]"));
    }
    let k = fmath::round(spec.support_fraction * spec.n as f64) as usize;
    if k < 1 {
        return Err(Error::InvalidInput("support fraction rounds to an empty support"));
    }

    let mut rng = SplitMix64::new(spec.noise_seed);
    let support = rng.sample_indices(spec.n, k);
    let magnitude = 1.0 / fmath::sqrt(k as f64);
    let mut u = vec![0.0f64; spec.n];
    for &i in &support {
        let sign = if rng.next_u64() & 1 == 0 { 1.0 } else { -1.0 };
        u[i] = sign * magnitude;
    }

    let n = spec.n;
    let mut cov = SymMat::zeros(n);
    for i in 0..n {
        for j in i..n {
            cov.set_sym(i, j, u[i] * u[j]);
        }
    }
    if !spec.noise_free {
        // V V^T / m accumulated row by row of V^T
        let mut noise_rows: Vec<Vec<f64>> = Vec::with_capacity(n);
        for _ in 0..n {
            noise_rows.push((0..spec.m).map(|_| rng.next_normal()).collect());
        }
        let inv_m = 1.0 / spec.m as f64;
        for i in 0..n {
            for j in i..n {
                let dot: f64 = noise_rows[i]
                    .iter()
                    .zip(&noise_rows[j])
                    .map(|(a, b)| a * b)
                    .sum();
                let v = cov.get(i, j) + dot * inv_m;
                cov.set_sym(i, j, v);
            }
        }
    }

    Ok(SpikedModel {
        covariance: CovarianceMatrix::synthetic(cov)?,
        true_support: support,
        leading: u,
    })
}

/// Gram covariance `F^T F / m` of an `m x n` standard normal matrix.
pub fn gaussian_model(n: usize, m: usize, seed: u64) -> Result<CovarianceMatrix> {
    if n < 1 || m < 1 {
        return Err(Error::InvalidInput("gaussian model needs n >= 1 and m >= 1"));
    }
    let mut rng = SplitMix64::new(seed);
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.next_normal()).collect())
        .collect();
    let mut cov = SymMat::zeros(n);
    let inv_m = 1.0 / m as f64;
    for i in 0..n {
        for j in i..n {
            let dot: f64 = rows.iter().map(|r| r[i] * r[j]).sum();
            cov.set_sym(i, j, dot * inv_m);
        }
    }
    CovarianceMatrix::synthetic(cov)
}

/// Dominant eigenpair of the covariance; `(0, e1)` for the zero matrix.
pub fn leading_eigenvector(sigma: &CovarianceMatrix, tol: f64) -> (f64, Vec<f64>) {
    mat::dominant_eigenpair(sigma.values(), tol)
}
