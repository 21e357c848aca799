//! Per-feature variance statistics and the safe elimination rule.
//!
//! A feature whose variance is at most the sparsity penalty `lambda` cannot
//! carry any optimal support of the cardinality-penalized problem, so
//! [`screen`] drops it before the solve. The rule here is non-strict
//! (`variance <= lambda` eliminates), which additionally guarantees that
//! every survivor has variance strictly above `lambda`, the precondition
//! the solver needs.
//!
//! Variances are accumulated from per-feature sums and sums of squares, so
//! shard accumulators merge associatively and, for integer count data, the
//! result is exact and independent of the shard split.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Streaming per-feature moments over a document collection.
///
/// Feature ids are 1-based, matching the bag-of-words convention.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    num_features: usize,
    num_docs: u64,
    mean: Vec<f64>,
    variance: Vec<f64>,
    /// Feature ids sorted by descending variance, ties by ascending id.
    sorted_order: Vec<u32>,
}

impl FeatureStats {
    /// Rebuilds stats (and the variance ranking) from stored moments.
    pub fn from_moments(num_docs: u64, mean: Vec<f64>, variance: Vec<f64>) -> Result<Self> {
        if mean.len() != variance.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: variance.len(),
            });
        }
        if num_docs == 0 {
            return Err(Error::InvalidInput("zero documents"));
        }
        if variance.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidInput("variance entries must be finite and nonnegative"));
        }
        let num_features = mean.len();
        let mut sorted_order: Vec<u32> = (1..=num_features as u32).collect();
        sorted_order.sort_by(|&a, &b| {
            let va = variance[(a - 1) as usize];
            let vb = variance[(b - 1) as usize];
            vb.partial_cmp(&va)
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        Ok(FeatureStats {
            num_features,
            num_docs,
            mean,
            variance,
            sorted_order,
        })
    }

    #[inline]
    pub fn num_features(&self) -> usize {
        self.num_features
    }

    #[inline]
    pub fn num_docs(&self) -> u64 {
        self.num_docs
    }

    /// Mean of feature `id` (1-based).
    #[inline]
    pub fn mean(&self, id: u32) -> f64 {
        self.mean[(id - 1) as usize]
    }

    /// Variance of feature `id` (1-based).
    #[inline]
    pub fn variance(&self, id: u32) -> f64 {
        self.variance[(id - 1) as usize]
    }

    #[inline]
    pub fn means(&self) -> &[f64] {
        &self.mean
    }

    #[inline]
    pub fn variances(&self) -> &[f64] {
        &self.variance
    }

    /// Ids by descending variance, ties by ascending id.
    #[inline]
    pub fn sorted_order(&self) -> &[u32] {
        &self.sorted_order
    }

    pub fn max_variance(&self) -> f64 {
        self.sorted_order
            .first()
            .map(|&id| self.variance(id))
            .unwrap_or(0.0)
    }
}

/// Mergeable accumulator behind [`FeatureStats`]: per-feature count sums and
/// squared-count sums. Absent entries are zeros and cost nothing.
#[derive(Debug, Clone)]
pub struct VarianceAccumulator {
    num_features: usize,
    docs_seen: u64,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
}

impl VarianceAccumulator {
    pub fn new(num_features: usize) -> Self {
        VarianceAccumulator {
            num_features,
            docs_seen: 0,
            sum: vec![0.0; num_features],
            sumsq: vec![0.0; num_features],
        }
    }

    pub fn docs_seen(&self) -> u64 {
        self.docs_seen
    }

    /// One document's sparse `(feature id, value)` entries (ids 1-based).
    pub fn add_document(&mut self, entries: &[(u32, f64)]) -> Result<()> {
        self.docs_seen += 1;
        for &(id, value) in entries {
            if id == 0 || id as usize > self.num_features {
                return Err(Error::UnknownFeature { id });
            }
            let k = (id - 1) as usize;
            self.sum[k] += value;
            self.sumsq[k] += value * value;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &VarianceAccumulator) -> Result<()> {
        if other.num_features != self.num_features {
            return Err(Error::DimensionMismatch {
                expected: self.num_features,
                got: other.num_features,
            });
        }
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sumsq.iter_mut().zip(&other.sumsq) {
            *a += b;
        }
        self.docs_seen += other.docs_seen;
        Ok(())
    }

    /// Moments over `total_docs` documents (absent documents count as
    /// all-zero, so `total_docs` may exceed the number fed in).
    pub fn finalize(self, total_docs: u64) -> Result<FeatureStats> {
        if total_docs == 0 {
            return Err(Error::InvalidInput("zero documents"));
        }
        if self.docs_seen > total_docs {
            return Err(Error::InvalidInput("saw more documents than the declared total"));
        }
        let m = total_docs as f64;
        let mut mean = vec![0.0; self.num_features];
        let mut variance = vec![0.0; self.num_features];
        for k in 0..self.num_features {
            let mu = self.sum[k] / m;
            mean[k] = mu;
            variance[k] = (self.sumsq[k] / m - mu * mu).max(0.0);
        }
        FeatureStats::from_moments(total_docs, mean, variance)
    }
}

/// Outcome of safe elimination at a given threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningResult {
    pub lambda: f64,
    /// Surviving ids in descending-variance order (ties ascending id).
    pub kept: Vec<u32>,
    pub original_n: usize,
    pub reduced_n: usize,
}

/// Keeps exactly the features with variance strictly above `lambda`.
/// Errors when nothing survives.
pub fn screen(stats: &FeatureStats, lambda: f64) -> Result<ScreeningResult> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidInput("lambda must be nonnegative"));
    }
    let kept: Vec<u32> = stats
        .sorted_order()
        .iter()
        .copied()
        .take_while(|&id| stats.variance(id) > lambda)
        .collect();
    if kept.is_empty() {
        return Err(Error::LambdaEliminatesAll {
            lambda,
            max_variance: stats.max_variance(),
        });
    }
    let reduced_n = kept.len();
    Ok(ScreeningResult {
        lambda,
        kept,
        original_n: stats.num_features(),
        reduced_n,
    })
}

/// Threshold that keeps at most `target_n` features: the `(target_n + 1)`-th
/// largest variance, or 0 when `target_n = n`. Exactly `target_n` survive
/// when that variance value is unique.
pub fn lambda_for_size(stats: &FeatureStats, target_n: usize) -> Result<f64> {
    let n = stats.num_features();
    if target_n < 1 || target_n > n {
        return Err(Error::TargetOutOfRange { target: target_n, n });
    }
    if target_n == n {
        return Ok(0.0);
    }
    Ok(stats.variance(stats.sorted_order()[target_n]))
}
