//! Block coordinate ascent for the penalized semidefinite relaxation.
//!
//! The relaxation `phi = max { Tr(S Z) - lambda ||Z||_1 : Z >= 0, Tr Z = 1 }`
//! is solved through its homogeneous reformulation
//!
//! ```text
//! max_X  Tr(S X) - lambda ||X||_1 - (Tr X)^2 / 2 + beta log det X,   X > 0
//! ```
//!
//! whose strictly concave log-det barrier (`beta = epsilon / n` for an
//! `epsilon`-suboptimal answer) makes one row/column pair at a time exactly
//! re-optimizable. With `Y` the iterate minus row/column `j`, `s` the
//! covariance column, `sigma = S_jj`, `t = Tr Y` and `c = sigma - lambda - t`,
//! the update solves
//!
//! 1. the box QP `R^2 = min { u^T Y u : ||u - s||_inf <= lambda }` by
//!    coordinate descent ([`box_qp`], scalar rule [`eta_update`]);
//! 2. the scalar problem `min_{tau>0} R^2/tau - beta log tau + (c+tau)^2/2`,
//!    whose stationarity is the cubic `tau^3 + c tau^2 - beta tau - R^2 = 0`
//!    ([`tau_solve`]);
//!
//! and writes back column `y = Y u / tau` and diagonal `x = c + tau`. The
//! Schur complement of the refreshed column is exactly `beta / tau > 0`, so
//! the iterate stays positive definite, and each update maximizes its
//! subproblem, so the objective never decreases.
//!
//! [`solve`] normalizes the covariance so its largest diagonal entry is 1
//! (and `lambda` with it) before sweeping; the optimizer scales exactly with
//! that normalization, so results are mapped back losslessly. The returned
//! `Z = X / Tr X` and `phi = Tr(S Z) - lambda ||Z||_1` are reported on the
//! original scale.

use alloc::vec;
use alloc::vec::Vec;

use crate::covariance::CovarianceMatrix;
use crate::fmath;
use crate::mat::{self, SymMat};
use crate::{Error, Result};

/// Fraction of the largest eigenvector entry below which a coordinate is
/// treated as barrier noise rather than genuine loading.
pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 1e-3;

/// Tunable knobs of one solve.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Sparsity penalty; must stay strictly below every diagonal entry of
    /// the covariance handed to [`solve`] (screening guarantees this).
    pub lambda: f64,
    /// Suboptimality target; the barrier weight is `epsilon / n` on the
    /// normalized scale.
    pub epsilon: f64,
    pub max_sweeps: usize,
    /// Stop when the relative objective increase of a sweep drops below this.
    pub sweep_tol: f64,
    /// Coordinate-descent stop: largest coordinate move per pass, relative
    /// to `1 + ||s||_inf`.
    pub qp_tol: f64,
    pub qp_max_passes: usize,
    /// Residual tolerance for the cubic root, relative to
    /// `max(1, |c|^3, R^2)`.
    pub tau_tol: f64,
}

impl SolverConfig {
    pub fn new(lambda: f64) -> Self {
        SolverConfig {
            lambda,
            epsilon: 1e-4,
            max_sweeps: 20,
            sweep_tol: 1e-6,
            qp_tol: 1e-8,
            // passes cost little once coordinates clamp, and a cap this
            // high is needed for the coordinate descent to actually reach
            // qp_tol on ill-conditioned subproblems; exiting early leaks
            // objective and breaks monotone ascent
            qp_max_passes: 1000,
            tau_tol: 1e-12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidConfig("lambda must be nonnegative"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be positive"));
        }
        if self.max_sweeps < 1 {
            return Err(Error::InvalidConfig("max_sweeps must be at least 1"));
        }
        if !(self.sweep_tol > 0.0) {
            return Err(Error::InvalidConfig("sweep_tol must be positive"));
        }
        if !(self.qp_tol > 0.0) {
            return Err(Error::InvalidConfig("qp_tol must be positive"));
        }
        if self.qp_max_passes < 1 {
            return Err(Error::InvalidConfig("qp_max_passes must be at least 1"));
        }
        if !(self.tau_tol > 0.0) {
            return Err(Error::InvalidConfig("tau_tol must be positive"));
        }
        Ok(())
    }
}

/// The iterate of the penalized problem plus its bookkeeping.
#[derive(Debug, Clone)]
pub struct SolverState {
    x: SymMat,
    objective_trace: Vec<f64>,
    sweeps_done: usize,
    warm_u: Vec<Vec<f64>>,
    scale: f64,
}

impl SolverState {
    /// Fresh state at the identity iterate.
    pub fn new(n: usize) -> Self {
        SolverState {
            x: SymMat::identity(n),
            objective_trace: Vec::new(),
            sweeps_done: 0,
            warm_u: vec![Vec::new(); n],
            scale: 1.0,
        }
    }

    /// Current iterate. When produced by [`solve`] this lives on the
    /// normalized scale (largest covariance diagonal = 1); multiply by
    /// [`SolverState::scale`] to return to the input scale.
    pub fn iterate(&self) -> &SymMat {
        &self.x
    }

    /// Diagonal scale divided out of the covariance before sweeping.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn iterate_original_scale(&self) -> SymMat {
        self.x.scaled(self.scale)
    }

    /// Penalized objective after each sweep (entry 0 is the start value),
    /// on the normalized scale.
    pub fn objective_trace(&self) -> &[f64] {
        &self.objective_trace
    }

    pub fn sweeps_done(&self) -> usize {
        self.sweeps_done
    }

    /// Feasibility check: a triangular factorization must succeed.
    pub fn is_positive_definite(&self) -> bool {
        self.x.is_positive_definite()
    }
}

/// A solved instance.
#[derive(Debug, Clone)]
pub struct Solution {
    pub state: SolverState,
    /// Normalized solution `Z = X / Tr X` (unit trace, PSD).
    pub z: SymMat,
    /// Unpenalized relaxation value `Tr(S Z) - lambda ||Z||_1` at `Z`,
    /// on the input scale.
    pub phi: f64,
}

/// Per-sweep progress handed to observers (trace export, logging).
#[derive(Debug, Clone)]
pub struct SweepInfo {
    pub sweep: usize,
    pub row_updates: u64,
    pub objective: f64,
}

#[inline]
fn clamp_to(v: f64, lo: f64, hi: f64) -> f64 {
    if v < lo {
        lo
    } else if v > hi {
        hi
    } else {
        v
    }
}

/// Minimizer of `y1 eta^2 + 2 g eta` over `|eta - s1| <= lambda`.
///
/// `g` is the off-diagonal inner product `yhat^T uhat` of the coordinate
/// being refreshed. For `y1 = 0` the objective is linear and the optimum
/// sits at the boundary: `s1 - lambda` when `g > 0`, else `s1 + lambda`.
pub fn eta_update(y1: f64, g: f64, s1: f64, lambda: f64) -> f64 {
    let lo = s1 - lambda;
    let hi = s1 + lambda;
    if y1 > 0.0 {
        clamp_to(-g / y1, lo, hi)
    } else if g > 0.0 {
        lo
    } else {
        hi
    }
}

/// Coordinate descent for `min { u^T Y u : ||u - s||_inf <= lambda }`.
///
/// `u` is the warm start (clamped into the box; the box center `s` when
/// empty) and is left at the solution. `w` is scratch for the running
/// product `Y u` and ends holding it exactly. Returns `R^2 = u^T Y u >= 0`.
fn box_qp_inner(
    y: &SymMat,
    s: &[f64],
    lambda: f64,
    u: &mut Vec<f64>,
    w: &mut Vec<f64>,
    qp_tol: f64,
    qp_max_passes: usize,
) -> f64 {
    let k = s.len();
    debug_assert_eq!(y.order(), k);
    if u.len() != k {
        u.clear();
        u.extend_from_slice(s);
    } else {
        for (ui, &si) in u.iter_mut().zip(s) {
            *ui = clamp_to(*ui, si - lambda, si + lambda);
        }
    }
    w.clear();
    w.resize(k, 0.0);
    if k == 0 {
        return 0.0;
    }
    y.matvec(u, w);

    let s_inf = s.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let stop = qp_tol * (1.0 + s_inf);
    let mut value: f64 = u.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
    for _pass in 0..qp_max_passes {
        let mut max_move = 0.0f64;
        for i in 0..k {
            let yi = y.get(i, i);
            let g = w[i] - yi * u[i];
            if yi == 0.0 && g == 0.0 {
                continue; // objective constant in this coordinate
            }
            let eta = eta_update(yi, g, s[i], lambda);
            let delta = eta - u[i];
            if delta != 0.0 {
                u[i] = eta;
                let row = y.row(i);
                for (wv, &yv) in w.iter_mut().zip(row) {
                    *wv += delta * yv;
                }
                let moved = delta.abs();
                if moved > max_move {
                    max_move = moved;
                }
            }
        }
        if max_move <= stop {
            break;
        }
        // flat-valley exit: when Y is near-singular the iterate can wander
        // along null directions without changing u^T Y u (or the recovered
        // column Y u, which annihilates those directions); once a whole
        // pass fails to lower the value at all, the answer is done even
        // though coordinates still move
        let new_value: f64 = u.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
        if new_value >= value {
            break;
        }
        value = new_value;
    }
    // refresh the product once so R^2 and the primal recovery use an exact Y u
    y.matvec(u, w);
    let r2: f64 = u.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
    r2.max(0.0)
}

/// Box-constrained QP `min { u^T Y u : ||u - s||_inf <= lambda }`.
///
/// Returns the minimizer and its value `R^2`. `warm` seeds the coordinate
/// descent (the box center is used when absent).
pub fn box_qp(
    y: &SymMat,
    s: &[f64],
    lambda: f64,
    warm: Option<&[f64]>,
    config: &SolverConfig,
) -> Result<(Vec<f64>, f64)> {
    if y.order() != s.len() {
        return Err(Error::DimensionMismatch {
            expected: y.order(),
            got: s.len(),
        });
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidConfig("lambda must be nonnegative"));
    }
    let mut u = match warm {
        Some(v) if v.len() == s.len() => v.to_vec(),
        _ => Vec::new(),
    };
    let mut w = Vec::new();
    let r2 = box_qp_inner(
        y,
        s,
        lambda,
        &mut u,
        &mut w,
        config.qp_tol,
        config.qp_max_passes,
    );
    Ok((u, r2))
}

/// Unique positive root of `tau^3 + c tau^2 - beta tau - R^2 = 0`, the
/// stationarity condition of `R^2/tau - beta log tau + (c + tau)^2 / 2`.
///
/// Safeguarded bisection: the cubic is negative for small `tau > 0` and
/// positive for large `tau`, with a single sign change (the underlying
/// scalar objective is strictly convex).
pub fn tau_solve(r2: f64, c: f64, beta: f64, tau_tol: f64) -> Result<f64> {
    if !(r2 >= 0.0) || !r2.is_finite() {
        return Err(Error::InvalidInput("R^2 must be finite and nonnegative"));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidInput("beta must be finite and positive"));
    }
    if !(tau_tol > 0.0) {
        return Err(Error::InvalidInput("tau tolerance must be positive"));
    }
    let cubic = |t: f64| ((t + c) * t - beta) * t - r2;
    let c_abs = c.abs();
    let scale = (c_abs * c_abs * c_abs).max(r2).max(1.0);

    let mut lo = beta / (c_abs + fmath::sqrt(r2) + 1.0);
    let mut shrinks = 0;
    while cubic(lo) >= 0.0 {
        lo *= 0.5;
        shrinks += 1;
        if shrinks > 200 {
            return Err(Error::TauBracketFailure { r2, c, beta });
        }
    }
    let mut hi = if -c > 1.0 { -c } else { 1.0 };
    let mut grows = 0;
    while cubic(hi) <= 0.0 {
        hi *= 2.0;
        grows += 1;
        if grows > 200 {
            return Err(Error::TauBracketFailure { r2, c, beta });
        }
    }

    for _ in 0..500 {
        let mid = 0.5 * (lo + hi);
        let f = cubic(mid);
        if f.abs() <= tau_tol * scale {
            return Ok(mid);
        }
        if f < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Penalized objective
/// `Tr(S X) - lambda ||X||_1 - (Tr X)^2 / 2 + beta log det X`.
///
/// Fails when `X` is not positive definite (the log-det factorization is
/// also the feasibility check).
pub fn objective(x: &SymMat, sigma: &SymMat, lambda: f64, beta: f64) -> Result<f64> {
    if x.order() != sigma.order() {
        return Err(Error::DimensionMismatch {
            expected: sigma.order(),
            got: x.order(),
        });
    }
    let log_det = x
        .log_det()
        .map_err(|column| Error::NotPositiveDefinite { sweep: 0, column })?;
    let tr = x.trace();
    Ok(sigma.frob_dot(x) - lambda * x.l1_norm() - 0.5 * tr * tr + beta * log_det)
}

/// Scratch buffers reused across row updates.
struct RowWorkspace {
    y: SymMat,
    s: Vec<f64>,
    w: Vec<f64>,
}

impl RowWorkspace {
    fn new(n: usize) -> Self {
        let k = n.saturating_sub(1);
        RowWorkspace {
            y: SymMat::zeros(k),
            s: vec![0.0; k],
            w: Vec::with_capacity(k),
        }
    }

    /// Loads `Y = X` minus row/column `j` and `s = Sigma`'s column `j`
    /// without its diagonal entry.
    fn load(&mut self, x: &SymMat, sigma: &SymMat, j: usize) {
        let n = x.order();
        let k = n - 1;
        debug_assert_eq!(self.y.order(), k);
        for sub_i in 0..k {
            let full_i = if sub_i < j { sub_i } else { sub_i + 1 };
            let src = x.row(full_i);
            let dst = self.y.row_mut(sub_i);
            dst[..j].copy_from_slice(&src[..j]);
            dst[j..].copy_from_slice(&src[j + 1..]);
            self.s[sub_i] = sigma.row(full_i)[j];
        }
    }
}

/// Exact line search along the central ray: replaces `X` by `gamma X` with
/// `gamma` maximizing `A gamma - B gamma^2 / 2 + n beta ln gamma`, where
/// `A = Tr(S X) - lambda ||X||_1` and `B = (Tr X)^2`. Row updates move mass
/// between coordinates only through the shared trace, one diagonal-gap per
/// sweep; this step sets the overall trace level in one go, so the sweeps
/// only have to fix the shape. Strict ascent, keeps `X` positive definite,
/// and leaves every box-QP minimizer unchanged (the QP objective scales
/// uniformly).
fn rescale_step(x: &mut SymMat, sigma: &SymMat, lambda: f64, beta: f64) {
    let trace = x.trace();
    let a = sigma.frob_dot(x) - lambda * x.l1_norm();
    let b = trace * trace;
    if !(b > 0.0) {
        return;
    }
    let nb = beta * x.order() as f64;
    let gamma = (a + fmath::sqrt(a * a + 4.0 * nb * b)) / (2.0 * b);
    if gamma.is_finite() && gamma > 0.0 && (gamma - 1.0).abs() > 1e-14 {
        x.scale_in_place(gamma);
    }
}

/// Joint mass transfer between two coordinates: replaces `X` by
/// `D^{1/2} X D^{1/2}` with `D = diag(.., gamma, .., 1/gamma, ..)` carrying
/// `gamma` at `i` and `1/gamma` at `j`. The congruence keeps `X` positive
/// definite and leaves `log det X` and the `(i, j)` entry unchanged, so the
/// objective change is an exact O(n) expression; `gamma` is chosen by a
/// golden-section search and the step only applies when it improves.
///
/// Row updates move mass between diagonal entries only through the shared
/// trace, at most one diagonal-gap per sweep; when two coordinates are
/// deadlocked that way (one starving, one hoarding), this step resolves the
/// pair in one move.
fn transfer_pair(x: &mut SymMat, sigma: &SymMat, lambda: f64, i: usize, j: usize) -> bool {
    let n = x.order();
    let xii = x.get(i, i);
    let xjj = x.get(j, j);
    if !(xii > 0.0) || !(xjj > 0.0) {
        return false;
    }
    let mut sig_i = 0.0; // sum_k Sigma_ik X_ik over k not in {i, j}
    let mut sig_j = 0.0;
    let mut abs_i = 0.0; // sum_k |X_ik| over k not in {i, j}
    let mut abs_j = 0.0;
    for k in 0..n {
        if k == i || k == j {
            continue;
        }
        sig_i += sigma.get(i, k) * x.get(i, k);
        sig_j += sigma.get(j, k) * x.get(j, k);
        abs_i += x.get(i, k).abs();
        abs_j += x.get(j, k).abs();
    }
    let sii = sigma.get(i, i);
    let sjj = sigma.get(j, j);
    let trace = x.trace();
    let t_rest = trace - xii - xjj;

    let delta = |r: f64| -> f64 {
        let r2 = r * r;
        let gi = r2 - 1.0;
        let gj = 1.0 / r2 - 1.0;
        let tr_term = sii * xii * gi + sjj * xjj * gj + 2.0 * (sig_i * (r - 1.0) + sig_j * (1.0 / r - 1.0));
        let l1_term = xii * gi + xjj * gj + 2.0 * (abs_i * (r - 1.0) + abs_j * (1.0 / r - 1.0));
        let new_trace = t_rest + r2 * xii + xjj / r2;
        tr_term - lambda * l1_term - 0.5 * (new_trace * new_trace - trace * trace)
    };

    // golden section on ln r
    let golden = 0.618_033_988_749_894_9_f64;
    let mut lo = -6.0f64; // ln r
    let mut hi = 6.0f64;
    for _ in 0..80 {
        let a = hi - golden * (hi - lo);
        let b = lo + golden * (hi - lo);
        if delta(fmath::exp(a)) > delta(fmath::exp(b)) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let r = fmath::exp(0.5 * (lo + hi));
    let gain = delta(r);
    if !(gain > 1e-15 * (1.0 + trace * trace)) || !r.is_finite() || r <= 0.0 {
        return false;
    }
    for k in 0..n {
        if k == i || k == j {
            continue;
        }
        x.set_sym(i, k, x.get(i, k) * r);
        x.set_sym(j, k, x.get(j, k) / r);
    }
    x.set_sym(i, i, xii * r * r);
    x.set_sym(j, j, xjj / (r * r));
    true
}

/// Transfers mass between coordinates that a sweep left in a deadlock:
/// a coordinate whose diagonal keeps climbing is fed by one that keeps
/// draining (the cyclic updates move such mass one diagonal-gap per sweep,
/// however small the gap). Climbers and drainers are read off the diagonal
/// drift over the sweep and paired greedily; pairs that cannot improve the
/// objective are skipped.
fn transfer_sweep(x: &mut SymMat, sigma: &SymMat, lambda: f64, diag_before: &[f64]) {
    let n = x.order();
    if n < 2 {
        return;
    }
    let mut drift: Vec<(usize, f64)> = (0..n)
        .map(|k| (k, x.get(k, k) - diag_before[k]))
        .collect();
    drift.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(core::cmp::Ordering::Equal));
    let scale = 1e-12 * (1.0 + x.trace());
    let pairs = 16.min(n / 2);
    for p in 0..pairs {
        let (climber, up) = drift[p];
        let (drainer, down) = drift[n - 1 - p];
        if up <= scale || down >= -scale || climber == drainer {
            break;
        }
        transfer_pair(x, sigma, lambda, climber, drainer);
    }
}

fn update_column(
    x: &mut SymMat,
    sigma: &SymMat,
    j: usize,
    lambda: f64,
    beta: f64,
    config: &SolverConfig,
    warm: &mut Vec<f64>,
    ws: &mut RowWorkspace,
) -> Result<()> {
    let n = x.order();
    ws.load(x, sigma, j);
    let t = x.trace() - x.get(j, j);
    let c = sigma.get(j, j) - lambda - t;
    let r2 = box_qp_inner(
        &ws.y,
        &ws.s,
        lambda,
        warm,
        &mut ws.w,
        config.qp_tol,
        config.qp_max_passes,
    );
    let tau = tau_solve(r2, c, beta, config.tau_tol)?;
    for sub in 0..n - 1 {
        let full = if sub < j { sub } else { sub + 1 };
        x.set_sym(full, j, ws.w[sub] / tau);
    }
    x.set_sym(j, j, c + tau);
    Ok(())
}

/// Re-optimizes row/column `j` of the iterate in place, leaving every other
/// entry untouched. The penalized objective cannot decrease. Unlike
/// [`solve`], no normalization is applied: the covariance, `lambda` and the
/// barrier `beta = epsilon / n` are used exactly as given.
pub fn row_update(
    state: &mut SolverState,
    sigma: &CovarianceMatrix,
    j: usize,
    config: &SolverConfig,
) -> Result<()> {
    config.validate()?;
    let n = state.x.order();
    if sigma.order() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: sigma.order(),
        });
    }
    if j >= n {
        return Err(Error::InvalidInput("column index out of range"));
    }
    let beta = config.epsilon / n as f64;
    let mut ws = RowWorkspace::new(n);
    update_column(
        &mut state.x,
        sigma.values(),
        j,
        config.lambda,
        beta,
        config,
        &mut state.warm_u[j],
        &mut ws,
    )
}

/// Full block coordinate ascent: sweeps row updates until the objective
/// gain of a sweep drops below `sweep_tol` (relative) or `max_sweeps` is
/// reached. A sweep that fails to improve the objective within the inner
/// tolerances is rolled back and treated as converged, so the recorded
/// trace is non-decreasing. See the module docs for the normalization
/// applied internally.
pub fn solve(sigma: &CovarianceMatrix, config: &SolverConfig) -> Result<Solution> {
    solve_with_observer_from(sigma, config, None, |_| {})
}

/// [`solve`] warm-started from a previous iterate instead of the identity.
///
/// `start` lives on the normalized scale (what [`SolverState::iterate`]
/// returns for a solve over the same covariance, or over a restriction of
/// it; restrict the iterate the same way) and must be positive definite.
/// Penalty searches chain solves this way: neighboring penalties have
/// nearby optima, so warm-started sweeps converge in a fraction of the
/// cold-start count.
pub fn solve_from(
    sigma: &CovarianceMatrix,
    config: &SolverConfig,
    start: &SymMat,
) -> Result<Solution> {
    solve_with_observer_from(sigma, config, Some(start), |_| {})
}

/// [`solve`] with a per-sweep callback (sweep 0 reports the start value).
pub fn solve_with_observer(
    sigma: &CovarianceMatrix,
    config: &SolverConfig,
    observe: impl FnMut(&SweepInfo),
) -> Result<Solution> {
    solve_with_observer_from(sigma, config, None, observe)
}

/// The general entry point behind [`solve`], [`solve_from`] and
/// [`solve_with_observer`].
pub fn solve_with_observer_from(
    sigma: &CovarianceMatrix,
    config: &SolverConfig,
    start: Option<&SymMat>,
    mut observe: impl FnMut(&SweepInfo),
) -> Result<Solution> {
    config.validate()?;
    let n = sigma.order();
    if n == 0 {
        return Err(Error::InvalidInput("empty matrix"));
    }
    let min_diag = sigma.min_diag();
    if !(config.lambda < min_diag) {
        return Err(Error::ScreeningRequired {
            lambda: config.lambda,
            min_diagonal: min_diag,
        });
    }

    let scale = sigma.max_diag(); // > 0 because min_diag > lambda >= 0
    let sigma_n = sigma.values().scaled(1.0 / scale);
    let lambda_n = config.lambda / scale;
    let beta = config.epsilon / n as f64;

    let mut state = SolverState::new(n);
    state.scale = scale;
    if let Some(x0) = start {
        if x0.order() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x0.order(),
            });
        }
        state.x = x0.clone();
    }
    let mut ws = RowWorkspace::new(n);

    let mut obj = objective(&state.x, &sigma_n, lambda_n, beta)?;
    state.objective_trace.push(obj);
    observe(&SweepInfo {
        sweep: 0,
        row_updates: 0,
        objective: obj,
    });

    let mut backup = state.x.clone();
    let mut diag_before = vec![0.0f64; n];
    for sweep in 1..=config.max_sweeps {
        backup.clone_from(&state.x);
        for (k, d) in diag_before.iter_mut().enumerate() {
            *d = state.x.get(k, k);
        }
        for j in 0..n {
            update_column(
                &mut state.x,
                &sigma_n,
                j,
                lambda_n,
                beta,
                config,
                &mut state.warm_u[j],
                &mut ws,
            )?;
        }
        rescale_step(&mut state.x, &sigma_n, lambda_n, beta);
        transfer_sweep(&mut state.x, &sigma_n, lambda_n, &diag_before);
        let new_obj = match objective(&state.x, &sigma_n, lambda_n, beta) {
            Err(Error::NotPositiveDefinite { column, .. }) => {
                return Err(Error::NotPositiveDefinite { sweep, column })
            }
            other => other?,
        };
        if new_obj < obj - 1e-9 * (1.0 + new_obj.abs()) {
            // each update maximizes its subproblem only to the inner
            // tolerances, so a sweep can lose a sliver of objective once
            // the true gain is below that accuracy: discard it and report
            // the last improving iterate. Anything bigger is a real fault.
            if obj - new_obj <= 1e-3 * (1.0 + new_obj.abs()) {
                state.x.clone_from(&backup);
                break;
            }
            return Err(Error::AscentViolation {
                sweep,
                previous: obj,
                current: new_obj,
            });
        }
        state.objective_trace.push(new_obj);
        state.sweeps_done = sweep;
        observe(&SweepInfo {
            sweep,
            row_updates: (sweep * n) as u64,
            objective: new_obj,
        });
        let gain = new_obj - obj;
        obj = new_obj;
        if gain <= config.sweep_tol * new_obj.abs().max(1.0) {
            break;
        }
    }

    let z = recover_z(&state.x)?;
    let phi = sigma.values().frob_dot(&z) - config.lambda * z.l1_norm();
    Ok(Solution { state, z, phi })
}

/// Unit-trace normalization `Z = X / Tr X`.
pub fn recover_z(x: &SymMat) -> Result<SymMat> {
    let trace = x.trace();
    if !(trace > 0.0) {
        return Err(Error::NonPositiveTrace { trace });
    }
    Ok(x.scaled(1.0 / trace))
}

/// Sparse principal component extracted from a solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseComponent {
    /// Original feature ids carrying the loading.
    pub support: Vec<u32>,
    /// Unit-norm loadings aligned with `support`; the largest-magnitude
    /// entry is positive.
    pub weights: Vec<f64>,
    /// `w^T S w` over the support, in input variance units.
    pub explained_variance: f64,
    pub cardinality: usize,
    pub lambda_used: f64,
    /// Unpenalized relaxation value at the solution this was read from.
    pub phi_estimate: f64,
    /// Set when every coordinate loads equally (no preferred direction),
    /// e.g. when the solution is a multiple of the identity.
    pub degenerate: bool,
}

/// Reads the sparse loading out of a unit-trace solution `Z`: the leading
/// eigenvector, restricted to entries above `support_threshold` times its
/// largest magnitude, renormalized.
pub fn extract_component(
    z: &SymMat,
    sigma: &CovarianceMatrix,
    support_threshold: f64,
    lambda_used: f64,
    phi_estimate: f64,
) -> Result<SparseComponent> {
    let n = z.order();
    if sigma.order() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: sigma.order(),
        });
    }
    if !(support_threshold >= 0.0 && support_threshold < 1.0) {
        return Err(Error::InvalidConfig("support threshold must lie in [0, 1)"));
    }
    let (_, v) = mat::dominant_eigenpair(z, 1e-10);
    let vmax = v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if vmax == 0.0 {
        return Err(Error::InvalidInput("zero eigenvector"));
    }
    let idx: Vec<usize> = (0..n)
        .filter(|&i| v[i].abs() > support_threshold * vmax)
        .collect();
    let mut weights: Vec<f64> = idx.iter().map(|&i| v[i]).collect();
    let norm = fmath::norm2(&weights);
    for w in &mut weights {
        *w /= norm;
    }
    let mut argmax = 0;
    for (k, w) in weights.iter().enumerate() {
        if w.abs() > weights[argmax].abs() {
            argmax = k;
        }
    }
    if weights[argmax] < 0.0 {
        for w in &mut weights {
            *w = -*w;
        }
    }

    let mut explained = 0.0;
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            explained += weights[a] * weights[b] * sigma.values().get(i, j);
        }
    }

    let wmax = weights[argmax].abs();
    let wmin = weights.iter().fold(f64::INFINITY, |m, w| m.min(w.abs()));
    let degenerate = idx.len() == n && n > 1 && (wmax - wmin) <= 1e-6 * wmax;

    let support: Vec<u32> = idx.iter().map(|&i| sigma.feature_ids()[i]).collect();
    let cardinality = support.len();
    Ok(SparseComponent {
        support,
        weights,
        explained_variance: explained.max(0.0),
        cardinality,
        lambda_used,
        phi_estimate,
        degenerate,
    })
}

/// Parameters of the penalty search for a target cardinality.
#[derive(Debug, Clone)]
pub struct LambdaSearch {
    pub target: usize,
    /// Accept any cardinality within `target ± slack`.
    pub slack: usize,
    /// Total solve budget (grid plus bisection).
    pub max_solves: usize,
    /// Coarse logarithmic grid size evaluated first.
    pub grid_points: usize,
    pub support_threshold: f64,
}

impl LambdaSearch {
    pub fn new(target: usize) -> Self {
        LambdaSearch {
            target,
            slack: 2,
            max_solves: 30,
            grid_points: 8,
            support_threshold: DEFAULT_SUPPORT_THRESHOLD,
        }
    }
}

/// One evaluated penalty value.
#[derive(Debug, Clone)]
pub struct ProbeEval {
    pub lambda: f64,
    pub cardinality: usize,
    pub sweeps: usize,
    pub component: Option<SparseComponent>,
}

/// Diagnostics of a finished search.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub component: SparseComponent,
    pub lambda: f64,
    /// Every probe in evaluation order.
    pub probes: Vec<ProbeEval>,
    /// Whether the returned cardinality lies within `target ± slack`.
    pub hit_window: bool,
}

/// Solves one penalty value: screens the diagonal at `lambda`, solves the
/// reduced problem and extracts the component.
pub fn probe_lambda(
    sigma: &CovarianceMatrix,
    base: &SolverConfig,
    support_threshold: f64,
    lambda: f64,
) -> Result<ProbeEval> {
    probe_lambda_warm(sigma, base, support_threshold, lambda, &mut WarmChain::new())
        .map(|(p, _)| p)
}

/// Iterates kept from earlier solves of a penalty search, so each new
/// probe can warm-start from the nearest penalty already solved.
struct WarmChain {
    solved: Vec<(f64, Vec<u32>, SymMat)>,
}

impl WarmChain {
    fn new() -> Self {
        WarmChain { solved: Vec::new() }
    }

    fn nearest(&self, lambda: f64) -> Option<&(f64, Vec<u32>, SymMat)> {
        self.solved.iter().min_by(|a, b| {
            let da = (fmath::ln(a.0.max(1e-300)) - fmath::ln(lambda.max(1e-300))).abs();
            let db = (fmath::ln(b.0.max(1e-300)) - fmath::ln(lambda.max(1e-300))).abs();
            da.partial_cmp(&db).unwrap_or(core::cmp::Ordering::Equal)
        })
    }
}

fn probe_lambda_warm(
    sigma: &CovarianceMatrix,
    base: &SolverConfig,
    support_threshold: f64,
    lambda: f64,
    chain: &mut WarmChain,
) -> Result<(ProbeEval, usize)> {
    let keep: Vec<usize> = (0..sigma.order())
        .filter(|&i| sigma.values().get(i, i) > lambda)
        .collect();
    if keep.is_empty() {
        return Ok((
            ProbeEval {
                lambda,
                cardinality: 0,
                sweeps: 0,
                component: None,
            },
            0,
        ));
    }
    let reduced = sigma.restrict(&keep)?;
    let mut config = base.clone();
    config.lambda = lambda;

    // warm start: copy the block of the nearest solved iterate covering
    // features shared with this screening set. Screening sets are nested
    // in lambda, so the move is a restriction or an extension; features
    // entering the problem start asleep at the donor's barrier-floor scale
    // rather than at identity, keeping the trace a continuation.
    let start: Option<SymMat> = chain.nearest(lambda).map(|(_, prev_ids, prev_x)| {
        let n = reduced.order();
        let pos: Vec<Option<usize>> = reduced
            .feature_ids()
            .iter()
            .map(|id| prev_ids.binary_search(id).ok())
            .collect();
        let mut floor = f64::INFINITY;
        for p in pos.iter().flatten() {
            floor = floor.min(prev_x.get(*p, *p));
        }
        if !floor.is_finite() || floor <= 0.0 {
            floor = 1.0;
        }
        let mut x0 = SymMat::zeros(n);
        for a in 0..n {
            match pos[a] {
                Some(pa) => {
                    for b in a..n {
                        if let Some(pb) = pos[b] {
                            x0.set_sym(a, b, prev_x.get(pa, pb));
                        }
                    }
                }
                None => x0.set_sym(a, a, floor),
            }
        }
        x0
    });
    let solution = match &start {
        Some(x0) => solve_from(&reduced, &config, x0)?,
        None => solve(&reduced, &config)?,
    };
    let component = extract_component(
        &solution.z,
        &reduced,
        support_threshold,
        lambda,
        solution.phi,
    )?;
    let sweeps = solution.state.sweeps_done();
    chain.solved.push((
        lambda,
        reduced.feature_ids().to_vec(),
        solution.state.iterate().clone(),
    ));
    Ok((
        ProbeEval {
            lambda,
            cardinality: component.cardinality,
            sweeps,
            component: Some(component),
        },
        sweeps,
    ))
}

/// Penalty search for a target cardinality: a coarse logarithmic grid over
/// the penalty (descending), then bisection against the achieved
/// cardinality, stopping at the first solution inside `target ± slack` or
/// when the solve budget runs out (closest cardinality wins then).
///
/// Solves are chained: each probe warm-starts from the previous iterate,
/// so the whole search behaves like path-following and later solves take
/// only a few sweeps. The chain also makes the search inherently
/// sequential; it is deterministic run to run.
pub fn search_lambda(
    sigma: &CovarianceMatrix,
    search: &LambdaSearch,
    base: &SolverConfig,
) -> Result<SearchOutcome> {
    if search.target < 1 {
        return Err(Error::InvalidConfig("target cardinality must be at least 1"));
    }
    if search.grid_points < 2 || search.max_solves < search.grid_points {
        return Err(Error::InvalidConfig("search budget smaller than the grid"));
    }
    let max_diag = sigma.max_diag();
    if !(max_diag > 0.0) {
        return Err(Error::LambdaEliminatesAll {
            lambda: 0.0,
            max_variance: max_diag,
        });
    }

    let target = search.target;
    let window = |card: usize| card.abs_diff(target) <= search.slack;
    let threshold = search.support_threshold;
    let mut chain = WarmChain::new();

    // Anchor the grid on the variance ranking: probe penalties that keep
    // roughly target/2 up to several-times-target features. Solves then
    // stay near the target cardinality, where warm-started sweeps converge
    // quickly; penalties far above it spend sweeps on near-tied singleton
    // fights that a cardinality search never needs.
    let n = sigma.order();
    let mut ranked: Vec<f64> = (0..n).map(|i| sigma.values().get(i, i)).collect();
    ranked.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    // lambda that keeps (strictly) everything above the k-th ranked value
    let lambda_keeping = |k: usize| -> f64 {
        if k >= n {
            return 0.0;
        }
        // between ranks k-1 and k so exactly k features survive ties aside
        let below = ranked[k];
        let above = ranked[k - 1];
        if above > below && below > 0.0 {
            fmath::sqrt(above * below)
        } else {
            below
        }
    };
    let g = search.grid_points;
    let mut keep_counts: Vec<usize> = Vec::new();
    let mut k = (target / 2).max(1);
    while keep_counts.len() < g && k < n {
        keep_counts.push(k);
        let next = (k * 3 + 1) / 2; // ratio 1.5 ladder
        k = next.max(k + 1);
    }
    if keep_counts.is_empty() {
        keep_counts.push(n); // lambda 0: the only usable penalty level
    }
    let mut grid: Vec<f64> = keep_counts
        .iter()
        .map(|&k| lambda_keeping(k))
        .filter(|l| l.is_finite() && *l >= 0.0 && *l < max_diag)
        .collect();
    grid.dedup();

    let mut probes: Vec<ProbeEval> = Vec::new();
    for &lambda in &grid {
        let (p, _) = probe_lambda_warm(sigma, base, threshold, lambda, &mut chain)?;
        probes.push(p.clone());
        if p.component.is_some() && window(p.cardinality) {
            return Ok(finish(p, probes, true));
        }
        if p.cardinality > target + search.slack {
            break; // already past the target; bisection takes over
        }
    }

    // bracket the target: lambda_hi gives too few features, lambda_lo too
    // many; cardinality grows as lambda shrinks
    let mut lambda_hi;
    let mut lambda_lo;
    let first_over = probes.iter().position(|p| p.cardinality > target);
    match first_over {
        Some(0) => {
            // even the largest grid penalty is too dense; push toward max_diag
            lambda_hi = max_diag * (1.0 - 1e-9);
            lambda_lo = probes[0].lambda;
        }
        Some(k) => {
            lambda_hi = probes[k - 1].lambda;
            lambda_lo = probes[k].lambda;
        }
        None => {
            // every grid probe is too sparse; extend toward zero
            lambda_hi = probes.last().expect("grid probed").lambda;
            lambda_lo = 0.0;
        }
    }

    let mut budget = search.max_solves.saturating_sub(probes.len());
    while budget > 0 {
        let mid = if lambda_lo > 0.0 {
            fmath::sqrt(lambda_lo * lambda_hi)
        } else {
            0.5 * lambda_hi
        };
        if !(mid > 0.0) || mid >= lambda_hi || (lambda_lo > 0.0 && mid <= lambda_lo) {
            break; // interval exhausted
        }
        let (p, _) = probe_lambda_warm(sigma, base, threshold, mid, &mut chain)?;
        probes.push(p.clone());
        budget -= 1;
        if p.component.is_some() && window(p.cardinality) {
            return Ok(finish(p, probes, true));
        }
        if p.cardinality > target {
            lambda_lo = mid;
        } else {
            lambda_hi = mid;
        }
    }

    // budget exhausted: closest cardinality wins, earlier probes break ties
    let best = probes
        .iter()
        .filter(|p| p.component.is_some())
        .min_by_key(|p| p.cardinality.abs_diff(target))
        .cloned()
        .ok_or(Error::LambdaEliminatesAll {
            lambda: max_diag,
            max_variance: max_diag,
        })?;
    let hit = window(best.cardinality);
    Ok(finish(best, probes, hit))
}

fn finish(chosen: ProbeEval, probes: Vec<ProbeEval>, hit_window: bool) -> SearchOutcome {
    SearchOutcome {
        lambda: chosen.lambda,
        component: chosen.component.expect("chosen probe has a component"),
        probes,
        hit_window,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance;
    use crate::rng::SplitMix64;

    fn cov(rows: &[&[f64]]) -> CovarianceMatrix {
        let m = SymMat::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
        CovarianceMatrix::synthetic(m).unwrap()
    }

    fn random_psd(rng: &mut SplitMix64, n: usize, m: usize) -> CovarianceMatrix {
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| rng.next_normal()).collect())
            .collect();
        let mut g = SymMat::zeros(n);
        for i in 0..n {
            for j in i..n {
                let dot: f64 = rows.iter().map(|r| r[i] * r[j]).sum();
                g.set_sym(i, j, dot / m as f64);
            }
        }
        CovarianceMatrix::synthetic(g).unwrap()
    }

    // ----- eta_update -----

    #[test]
    fn eta_interior_point() {
        assert_eq!(eta_update(2.0, 1.0, 0.0, 1.0), -0.5);
    }

    #[test]
    fn eta_lower_clamp() {
        assert_eq!(eta_update(1.0, 5.0, 0.0, 1.0), -1.0);
    }

    #[test]
    fn eta_zero_curvature_branches() {
        assert_eq!(eta_update(0.0, -2.0, 0.3, 0.2), 0.5);
        assert_eq!(eta_update(0.0, 2.0, 0.3, 0.2), 0.3 - 0.2);
    }

    #[test]
    fn eta_beats_endpoints_and_clamp() {
        // coordinate optimality over a deterministic sample of inputs
        let mut rng = SplitMix64::new(99);
        for _ in 0..100_000 {
            let y1 = if rng.next_f64() < 0.1 { 0.0 } else { rng.next_f64() * 3.0 };
            let g = rng.next_normal();
            let s1 = rng.next_normal();
            let lambda = rng.next_f64() * 2.0;
            let eta = eta_update(y1, g, s1, lambda);
            assert!(eta >= s1 - lambda - 1e-15 && eta <= s1 + lambda + 1e-15);
            let value = |e: f64| y1 * e * e + 2.0 * g * e;
            let v = value(eta);
            let tol = 1e-12 * (1.0 + v.abs());
            assert!(v <= value(s1 - lambda) + tol);
            assert!(v <= value(s1 + lambda) + tol);
            if y1 > 0.0 {
                let clamped = clamp_to(-g / y1, s1 - lambda, s1 + lambda);
                assert!(v <= value(clamped) + tol);
            }
        }
    }

    // ----- tau_solve -----

    /// Independent reference: golden-section minimization of the scalar
    /// objective R^2/tau - beta ln tau + (c + tau)^2 / 2 itself, never
    /// touching the cubic.
    fn tau_golden_oracle(r2: f64, c: f64, beta: f64) -> f64 {
        let value = |t: f64| r2 / t - beta * t.ln() + 0.5 * (c + t) * (c + t);
        let mut lo = 1e-12f64;
        let mut hi = 1e6f64;
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut a = hi - phi * (hi - lo);
        let mut b = lo + phi * (hi - lo);
        let mut fa = value(a);
        let mut fb = value(b);
        for _ in 0..400 {
            if fa < fb {
                hi = b;
                b = a;
                fb = fa;
                a = hi - phi * (hi - lo);
                fa = value(a);
            } else {
                lo = a;
                a = b;
                fa = fb;
                b = lo + phi * (hi - lo);
                fb = value(b);
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn tau_quadratic_closed_form() {
        // R^2 = 0 reduces the cubic to tau^2 + c tau - beta = 0
        let tau = tau_solve(0.0, 0.0, 0.04, 1e-14).unwrap();
        assert!((tau - 0.2).abs() < 1e-12, "{tau}");
    }

    #[test]
    fn tau_matches_golden_section_oracle() {
        for &(r2, c, beta) in &[
            (1.0, 0.0, 0.01),
            (0.25, -1.0, 0.01),
            (0.0, 3.0, 1e-6),
            (4.0, -2.5, 1e-4),
            (1e-9, 0.5, 1e-8),
        ] {
            let tau = tau_solve(r2, c, beta, 1e-14).unwrap();
            let oracle = tau_golden_oracle(r2, c, beta);
            assert!(
                (tau - oracle).abs() <= 1e-6 * (1.0 + oracle),
                "tau {tau} vs oracle {oracle} at ({r2}, {c}, {beta})"
            );
        }
    }

    #[test]
    fn tau_pinned_values() {
        // roots pinned from the golden-section oracle
        let t1 = tau_solve(1.0, 0.0, 0.01, 1e-14).unwrap();
        assert!((t1 - 1.003_328).abs() < 1e-5, "{t1}");
        let t2 = tau_solve(0.25, -1.0, 0.01, 1e-14).unwrap();
        assert!((t2 - 1.186_143).abs() < 1e-4, "{t2}");
    }

    #[test]
    fn tau_residual_meets_tolerance() {
        let mut rng = SplitMix64::new(5);
        for _ in 0..500 {
            let r2 = rng.next_f64() * 4.0;
            let c = rng.next_normal() * 3.0;
            let beta = 1e-8f64.max(rng.next_f64() * 0.1);
            let tau = tau_solve(r2, c, beta, 1e-12).unwrap();
            assert!(tau > 0.0);
            let res = ((tau + c) * tau - beta) * tau - r2;
            let scale = (c.abs().powi(3)).max(r2).max(1.0);
            assert!(res.abs() <= 1e-11 * scale, "res {res} scale {scale}");
        }
    }

    #[test]
    fn tau_rejects_bad_inputs() {
        assert!(tau_solve(-1.0, 0.0, 0.1, 1e-12).is_err());
        assert!(tau_solve(1.0, 0.0, 0.0, 1e-12).is_err());
        assert!(tau_solve(1.0, 0.0, -1.0, 1e-12).is_err());
    }

    // ----- box_qp -----

    fn default_cfg() -> SolverConfig {
        SolverConfig::new(0.0)
    }

    #[test]
    fn box_qp_separable_soft_threshold() {
        let y = SymMat::identity(2);
        let (u, r2) = box_qp(&y, &[3.0, 0.5], 1.0, None, &default_cfg()).unwrap();
        assert!((u[0] - 2.0).abs() < 1e-12);
        assert!(u[1].abs() < 1e-12);
        assert!((r2 - 4.0).abs() < 1e-10);
    }

    #[test]
    fn box_qp_zero_matrix_keeps_center() {
        let y = SymMat::zeros(3);
        let s = [1.0, -2.0, 0.5];
        let (u, r2) = box_qp(&y, &s, 0.7, None, &default_cfg()).unwrap();
        assert_eq!(u, s.to_vec());
        assert_eq!(r2, 0.0);
    }

    /// Fine grid over the box, refined once around the best cell.
    fn box_qp_grid_oracle(y: &SymMat, s: &[f64], lambda: f64, steps: usize) -> (Vec<f64>, f64) {
        assert_eq!(s.len(), 2, "grid oracle is 2-d");
        let mut best = (Vec::new(), f64::INFINITY);
        let mut centers = vec![(s[0], s[1], lambda)];
        for _refine in 0..3 {
            let (c0, c1, span) = centers.pop().unwrap();
            for a in 0..=steps {
                for b in 0..=steps {
                    let u0 = (c0 - span + 2.0 * span * a as f64 / steps as f64)
                        .clamp(s[0] - lambda, s[0] + lambda);
                    let u1 = (c1 - span + 2.0 * span * b as f64 / steps as f64)
                        .clamp(s[1] - lambda, s[1] + lambda);
                    let u = vec![u0, u1];
                    let v = y.quad_form(&u);
                    if v < best.1 {
                        best = (u, v);
                    }
                }
            }
            let span = span * 2.0 / steps as f64;
            centers.push((best.0[0], best.0[1], span));
        }
        best
    }

    #[test]
    fn box_qp_matches_grid_oracle() {
        let y = SymMat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let s = [1.0, -1.0];
        let (u, r2) = box_qp(&y, &s, 0.5, None, &default_cfg()).unwrap();
        assert!((u[0] - 0.5).abs() < 1e-8);
        assert!((u[1] + 0.5).abs() < 1e-8);
        assert!((r2 - 0.5).abs() < 1e-8);
        let (gu, gv) = box_qp_grid_oracle(&y, &s, 0.5, 60);
        assert!((r2 - gv).abs() < 1e-4, "qp {r2} vs grid {gv}");
        assert!((u[0] - gu[0]).abs() < 1e-2 && (u[1] - gu[1]).abs() < 1e-2);
    }

    #[test]
    fn box_qp_random_instances_beat_grid() {
        let mut rng = SplitMix64::new(31);
        for _ in 0..20 {
            // random 2x2 PSD
            let a = rng.next_normal();
            let b = rng.next_normal();
            let c = rng.next_normal();
            let y = SymMat::from_rows(&[
                vec![a * a + b * b, a * c],
                vec![a * c, c * c + 0.1],
            ])
            .unwrap();
            let s = [rng.next_normal(), rng.next_normal()];
            let lambda = 0.1 + rng.next_f64();
            let (u, r2) = box_qp(&y, &s, lambda, None, &default_cfg()).unwrap();
            for (ui, si) in u.iter().zip(&s) {
                assert!((ui - si).abs() <= lambda + 1e-12, "feasibility");
            }
            let (_, gv) = box_qp_grid_oracle(&y, &s, lambda, 80);
            assert!(r2 <= gv + 1e-6 * (1.0 + gv), "qp {r2} grid {gv}");
        }
    }

    #[test]
    fn box_qp_coordinatewise_optimal() {
        let mut rng = SplitMix64::new(77);
        let n = 6;
        let sigma = random_psd(&mut rng, n, 8);
        let y = sigma.values();
        let s: Vec<f64> = (0..n).map(|_| rng.next_normal()).collect();
        let lambda = 0.3;
        let cfg = default_cfg();
        let (u, _) = box_qp(y, &s, lambda, None, &cfg).unwrap();
        let mut w = vec![0.0; n];
        y.matvec(&u, &mut w);
        let s_inf = s.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        for i in 0..n {
            let g = w[i] - y.get(i, i) * u[i];
            let eta = eta_update(y.get(i, i), g, s[i], lambda);
            assert!(
                (eta - u[i]).abs() <= cfg.qp_tol * (1.0 + s_inf) * 10.0,
                "coordinate {i} moved {}",
                (eta - u[i]).abs()
            );
        }
    }

    // ----- objective -----

    #[test]
    fn objective_identity_cases() {
        let sig = SymMat::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let x = SymMat::identity(2);
        let v = objective(&x, &sig, 0.0, 0.1).unwrap();
        assert!((v - 2.0).abs() < 1e-12);

        let eye = SymMat::identity(2);
        let x2 = eye.scaled(2.0);
        // beta = 0 is rejected by SolverConfig but fine for the bare function
        let v2 = objective(&x2, &eye, 1.0, 0.0).unwrap();
        assert!((v2 + 8.0).abs() < 1e-12);
    }

    #[test]
    fn objective_rejects_indefinite() {
        let sig = SymMat::identity(2);
        let x = SymMat::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(
            objective(&x, &sig, 0.0, 0.1),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    /// Inverse via the public Cholesky factor (test-side substitution).
    fn inverse_from_cholesky(x: &SymMat) -> Vec<Vec<f64>> {
        let n = x.order();
        let l = x.cholesky().unwrap();
        let mut inv = vec![vec![0.0; n]; n];
        for col in 0..n {
            // forward: L z = e_col
            let mut z = vec![0.0; n];
            for i in 0..n {
                let mut v = if i == col { 1.0 } else { 0.0 };
                for k in 0..i {
                    v -= l[i * n + k] * z[k];
                }
                z[i] = v / l[i * n + i];
            }
            // backward: L^T w = z
            let mut w = vec![0.0; n];
            for i in (0..n).rev() {
                let mut v = z[i];
                for k in (i + 1)..n {
                    v -= l[k * n + i] * w[k];
                }
                w[i] = v / l[i * n + i];
            }
            for r in 0..n {
                inv[r][col] = w[r];
            }
        }
        inv
    }

    #[test]
    fn objective_gradient_matches_finite_differences() {
        let mut rng = SplitMix64::new(13);
        let n = 5;
        let sigma = random_psd(&mut rng, n, 9);
        // random PD X: Gram plus a diagonal shift
        let base = random_psd(&mut rng, n, 7);
        let mut x = base.values().clone();
        for i in 0..n {
            let v = x.get(i, i) + 1.0;
            x.set_sym(i, i, v);
        }
        let beta = 0.05;
        let smooth = |m: &SymMat| -> f64 {
            let tr = m.trace();
            sigma.values().frob_dot(m) - 0.5 * tr * tr + beta * m.log_det().unwrap()
        };
        let inv = inverse_from_cholesky(&x);
        let tr = x.trace();
        // grad = Sigma - (Tr X) I + beta X^{-1}
        let mut grad = SymMat::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut v = sigma.values().get(i, j) + beta * inv[i][j];
                if i == j {
                    v -= tr;
                }
                grad.set_sym(i, j, v);
            }
        }
        let h = 1e-6;
        for _ in 0..6 {
            let mut dir = SymMat::zeros(n);
            for i in 0..n {
                for j in i..n {
                    dir.set_sym(i, j, rng.next_normal());
                }
            }
            let mut xp = x.clone();
            let mut xm = x.clone();
            for i in 0..n {
                for j in i..n {
                    xp.set_sym(i, j, x.get(i, j) + h * dir.get(i, j));
                    xm.set_sym(i, j, x.get(i, j) - h * dir.get(i, j));
                }
            }
            let fd = (smooth(&xp) - smooth(&xm)) / (2.0 * h);
            let analytic = grad.frob_dot(&dir);
            assert!(
                (fd - analytic).abs() <= 1e-5 * (1.0 + analytic.abs()),
                "fd {fd} vs grad {analytic}"
            );
        }
    }

    // ----- row_update -----

    #[test]
    fn scalar_update_closed_form() {
        // order 1: stationarity of (sigma - lambda) x - x^2/2 + beta ln x
        let sigma = cov(&[&[2.0]]);
        let mut config = SolverConfig::new(0.5);
        config.epsilon = 0.08; // beta = 0.08 at n = 1
        let mut state = SolverState::new(1);
        row_update(&mut state, &sigma, 0, &config).unwrap();
        let c: f64 = 2.0 - 0.5;
        let beta = 0.08;
        let expected = 0.5 * (c + (c * c + 4.0 * beta).sqrt());
        assert!(
            (state.iterate().get(0, 0) - expected).abs() < 1e-9,
            "{} vs {expected}",
            state.iterate().get(0, 0)
        );
    }

    #[test]
    fn diagonal_covariance_keeps_diagonal_iterate() {
        let sigma = cov(&[&[3.0, 0.0], &[0.0, 1.0]]);
        let config = SolverConfig::new(0.5);
        let mut state = SolverState::new(2);
        for j in 0..2 {
            row_update(&mut state, &sigma, j, &config).unwrap();
        }
        assert_eq!(state.iterate().get(0, 1), 0.0);
    }

    #[test]
    fn row_update_leaves_other_entries_untouched() {
        let mut rng = SplitMix64::new(3);
        let sigma = random_psd(&mut rng, 5, 8);
        let config = SolverConfig::new(0.05 * sigma.min_diag());
        let mut state = SolverState::new(5);
        let before = state.iterate().clone();
        row_update(&mut state, &sigma, 2, &config).unwrap();
        let after = state.iterate();
        for i in 0..5 {
            for j in 0..5 {
                if i != 2 && j != 2 {
                    assert_eq!(before.get(i, j), after.get(i, j));
                }
            }
        }
    }

    /// Direct numerical re-maximization of the row subproblem over y (the
    /// diagonal entry is eliminated in closed form), using an explicit
    /// inverse of Y. Coordinate-wise golden-section ascent; the subproblem
    /// is concave with a separable nonsmooth part, so this converges to the
    /// global maximum.
    fn subproblem_value(
        y_mat: &SymMat,
        s: &[f64],
        sigma_jj: f64,
        lambda: f64,
        beta: f64,
        y: &[f64],
    ) -> f64 {
        let t = y_mat.trace();
        let inv = inverse_from_cholesky(y_mat);
        let k = s.len();
        let mut q = 0.0;
        for i in 0..k {
            for j in 0..k {
                q += y[i] * inv[i][j] * y[j];
            }
        }
        let a = sigma_jj - lambda - t - q;
        let d = 0.5 * (a + (a * a + 4.0 * beta).sqrt());
        let x = q + d;
        let lin: f64 = y.iter().zip(s).map(|(yi, si)| yi * si).sum();
        let l1: f64 = y.iter().map(|v| v.abs()).sum();
        2.0 * (lin - lambda * l1) + (sigma_jj - lambda) * x - 0.5 * (t + x) * (t + x)
            + beta * (x - q).ln()
    }

    fn maximize_subproblem(
        y_mat: &SymMat,
        s: &[f64],
        sigma_jj: f64,
        lambda: f64,
        beta: f64,
        start: &[f64],
    ) -> f64 {
        let k = s.len();
        let mut y = start.to_vec();
        let mut best = subproblem_value(y_mat, s, sigma_jj, lambda, beta, &y);
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        for round in 0..200 {
            let span = 2.0 * 0.97f64.powi(round);
            let mut improved = false;
            for i in 0..k {
                let mut lo = y[i] - span;
                let mut hi = y[i] + span;
                let value = |v: f64, y: &mut Vec<f64>| {
                    let old = y[i];
                    y[i] = v;
                    let r = subproblem_value(y_mat, s, sigma_jj, lambda, beta, y);
                    y[i] = old;
                    r
                };
                for _ in 0..70 {
                    let a = hi - golden * (hi - lo);
                    let b = lo + golden * (hi - lo);
                    if value(a, &mut y) > value(b, &mut y) {
                        hi = b;
                    } else {
                        lo = a;
                    }
                }
                let cand = 0.5 * (lo + hi);
                let v = value(cand, &mut y);
                if v > best + 1e-15 {
                    best = v;
                    y[i] = cand;
                    improved = true;
                }
            }
            if !improved && round > 20 {
                break;
            }
        }
        best
    }

    #[test]
    fn row_update_matches_subproblem_oracle() {
        let mut rng = SplitMix64::new(21);
        let sigma = random_psd(&mut rng, 5, 9);
        let lambda = 0.1 * sigma.min_diag();
        let mut config = SolverConfig::new(lambda);
        config.epsilon = 5e-4; // beta = 1e-4
        config.qp_tol = 1e-12;
        let beta = config.epsilon / 5.0;

        let mut state = SolverState::new(5);
        // move the iterate off the identity first
        for j in 0..5 {
            row_update(&mut state, &sigma, j, &config).unwrap();
        }
        let before =
            objective(state.iterate(), sigma.values(), lambda, beta).unwrap();

        let j = 3usize;
        // capture the subproblem data before the update
        let keep: Vec<usize> = (0..5).filter(|&i| i != j).collect();
        let y_mat = state.iterate().principal_submatrix(&keep);
        let s: Vec<f64> = keep.iter().map(|&i| sigma.values().get(i, j)).collect();
        let sigma_jj = sigma.values().get(j, j);

        row_update(&mut state, &sigma, j, &config).unwrap();
        let after = objective(state.iterate(), sigma.values(), lambda, beta).unwrap();
        assert!(after >= before - 1e-9 * (1.0 + after.abs()), "ascent");

        // our achieved subproblem value
        let y_new: Vec<f64> = keep.iter().map(|&i| state.iterate().get(i, j)).collect();
        let ours = subproblem_value(&y_mat, &s, sigma_jj, lambda, beta, &y_new);
        // re-maximize from scratch and from our point: concavity means the
        // larger of the two certifies the optimum either way
        let from_zero = maximize_subproblem(&y_mat, &s, sigma_jj, lambda, beta, &vec![0.0; 4]);
        let from_ours = maximize_subproblem(&y_mat, &s, sigma_jj, lambda, beta, &y_new);
        let oracle = from_zero.max(from_ours);
        assert!(
            (ours - oracle).abs() <= 1e-6 * (1.0 + ours.abs()),
            "ours {ours} vs re-maximization {oracle}"
        );
    }

    #[test]
    fn row_updates_never_decrease_objective() {
        let mut rng = SplitMix64::new(8);
        let sigma = random_psd(&mut rng, 6, 10);
        let lambda = 0.2 * sigma.min_diag();
        let config = SolverConfig::new(lambda);
        let beta = config.epsilon / 6.0;
        let mut state = SolverState::new(6);
        let mut prev = objective(state.iterate(), sigma.values(), lambda, beta).unwrap();
        for sweep in 0..4 {
            for j in 0..6 {
                row_update(&mut state, &sigma, j, &config).unwrap();
                let now = objective(state.iterate(), sigma.values(), lambda, beta).unwrap();
                assert!(
                    now >= prev - 1e-9 * (1.0 + now.abs()),
                    "sweep {sweep} column {j}: {prev} -> {now}"
                );
                prev = now;
                assert!(state.is_positive_definite());
            }
        }
    }

    // ----- solve -----

    #[test]
    fn solve_diagonal_two_by_two() {
        let sigma = cov(&[&[3.0, 0.0], &[0.0, 1.0]]);
        let mut config = SolverConfig::new(0.5);
        config.epsilon = 1e-6;
        let sol = solve(&sigma, &config).unwrap();
        assert!((sol.phi - 2.5).abs() < 1e-3, "phi {}", sol.phi);
        assert!(sol.z.get(0, 0) > 1.0 - 1e-3);
        assert!(sol.z.get(1, 1) < 1e-3);
        assert!((sol.z.trace() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn solve_zero_lambda_is_pca() {
        let mut rng = SplitMix64::new(4);
        for _ in 0..5 {
            let sigma = random_psd(&mut rng, 12, 20);
            let mut config = SolverConfig::new(0.0);
            config.epsilon = 1e-6;
            let sol = solve(&sigma, &config).unwrap();
            let (theta, _) = covariance::leading_eigenvector(&sigma, 1e-10);
            assert!(
                (sol.phi - theta).abs() <= 1e-3 * theta,
                "phi {} vs eigenvalue {theta}",
                sol.phi
            );
        }
    }

    #[test]
    fn solve_beats_brute_force_within_epsilon() {
        let sigma = cov(&[&[2.0, 1.5], &[1.5, 2.0]]);
        let mut config = SolverConfig::new(1.0);
        config.epsilon = 1e-5;
        let sol = solve(&sigma, &config).unwrap();
        // enumeration: psi = max(2 - 1, 2 - 1, 3.5 - 2) = 1.5; phi >= psi
        assert!(sol.phi >= 1.5 - 10.0 * config.epsilon * 2.0, "phi {}", sol.phi);
    }

    #[test]
    fn solve_requires_screening() {
        let sigma = cov(&[&[3.0, 0.0], &[0.0, 1.0]]);
        let config = SolverConfig::new(1.0); // equals the min diagonal
        assert!(matches!(
            solve(&sigma, &config),
            Err(Error::ScreeningRequired { .. })
        ));
    }

    #[test]
    fn solve_trace_is_monotone_and_recorded() {
        let mut rng = SplitMix64::new(12);
        let sigma = random_psd(&mut rng, 8, 14);
        let config = SolverConfig::new(0.3 * sigma.min_diag());
        let mut seen = Vec::new();
        let sol = solve_with_observer(&sigma, &config, |info| {
            seen.push((info.sweep, info.row_updates, info.objective));
        })
        .unwrap();
        assert_eq!(seen.len(), sol.state.objective_trace().len());
        assert_eq!(seen[0].0, 0);
        for w in sol.state.objective_trace().windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * (1.0 + w[1].abs()));
        }
        assert!(sol.state.sweeps_done() <= config.max_sweeps);
        assert!(sol.state.is_positive_definite());
    }

    #[test]
    fn solve_homogeneity_scaling() {
        let mut rng = SplitMix64::new(19);
        let sigma = random_psd(&mut rng, 6, 9);
        let lambda = 0.2 * sigma.min_diag();
        let alpha = 3.7;
        let scaled = CovarianceMatrix::synthetic(sigma.values().scaled(alpha)).unwrap();

        let config = SolverConfig::new(lambda);
        let mut config_scaled = config.clone();
        config_scaled.lambda = lambda * alpha;

        let a = solve(&sigma, &config).unwrap();
        let b = solve(&scaled, &config_scaled).unwrap();

        let xa = a.state.iterate_original_scale();
        let xb = b.state.iterate_original_scale();
        let mut diff = 0.0f64;
        for i in 0..6 {
            for j in 0..6 {
                diff = diff.max((xb.get(i, j) - alpha * xa.get(i, j)).abs());
            }
        }
        assert!(
            diff <= 1e-6 * alpha * xa.frob_norm(),
            "iterates diverge by {diff}"
        );
        assert!((b.phi - alpha * a.phi).abs() <= 1e-6 * alpha * a.phi.abs().max(1.0));
    }

    #[test]
    fn solve_order_one() {
        let sigma = cov(&[&[2.0]]);
        let config = SolverConfig::new(0.5);
        let sol = solve(&sigma, &config).unwrap();
        assert!((sol.z.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((sol.phi - 1.5).abs() < 1e-3);
    }

    // ----- recover_z / extract_component -----

    #[test]
    fn recover_z_scales_trace_to_one() {
        let x = SymMat::identity(2).scaled(2.0);
        let z = recover_z(&x).unwrap();
        assert_eq!(z.get(0, 0), 0.5);
        let mut spike = SymMat::zeros(3);
        spike.set_sym(0, 0, 7.0);
        let z2 = recover_z(&spike).unwrap();
        assert_eq!(z2.get(0, 0), 1.0);
        assert!((z2.trace() - 1.0).abs() <= 1e-12);
        assert!(recover_z(&SymMat::zeros(2)).is_err());
    }

    #[test]
    fn extract_rank_one_spike() {
        let sigma = cov(&[&[4.0, 0.0], &[0.0, 1.0]]);
        let mut z = SymMat::zeros(2);
        z.set_sym(0, 0, 1.0);
        let c = extract_component(&z, &sigma, 1e-3, 0.5, 3.5).unwrap();
        assert_eq!(c.support, vec![1]);
        assert_eq!(c.weights, vec![1.0]);
        assert_eq!(c.cardinality, 1);
        assert!((c.explained_variance - 4.0).abs() < 1e-12);
        assert!(!c.degenerate);
    }

    #[test]
    fn extract_identity_is_degenerate() {
        let sigma = cov(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let z = SymMat::identity(2).scaled(0.5);
        let c = extract_component(&z, &sigma, 1e-3, 0.0, 1.0).unwrap();
        assert_eq!(c.cardinality, 2);
        assert!(c.degenerate);
        let norm: f64 = c.weights.iter().map(|w| w * w).sum();
        assert!((norm - 1.0).abs() < 1e-10);
    }

    #[test]
    fn extract_sign_convention() {
        let sigma = cov(&[&[2.0, 0.0], &[0.0, 1.0]]);
        let mut z = SymMat::zeros(2);
        // spike along -e1 direction: eigenvector may come out negative
        z.set_sym(0, 0, 0.9);
        z.set_sym(0, 1, -0.29);
        z.set_sym(1, 1, 0.1);
        let c = extract_component(&z, &sigma, 1e-3, 0.0, 0.0).unwrap();
        let mut argmax = 0;
        for (k, w) in c.weights.iter().enumerate() {
            if w.abs() > c.weights[argmax].abs() {
                argmax = k;
            }
        }
        assert!(c.weights[argmax] > 0.0);
    }

    // ----- search_lambda -----

    #[test]
    fn search_finds_singleton_on_staircase_diagonal() {
        let sigma = cov(&[
            &[5.0, 0.0, 0.0, 0.0, 0.0],
            &[0.0, 4.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 3.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 2.0, 0.0],
            &[0.0, 0.0, 0.0, 0.0, 1.0],
        ]);
        let mut search = LambdaSearch::new(1);
        search.slack = 0;
        let out = search_lambda(&sigma, &search, &SolverConfig::new(0.0)).unwrap();
        assert!(out.hit_window);
        assert_eq!(out.component.support, vec![1]);
        assert!(out.lambda > 4.0 && out.lambda < 5.0, "lambda {}", out.lambda);
    }

    #[test]
    fn search_respects_budget_and_reports_probes() {
        let mut rng = SplitMix64::new(40);
        let sigma = random_psd(&mut rng, 10, 18);
        let search = LambdaSearch::new(3);
        let out = search_lambda(&sigma, &search, &SolverConfig::new(0.0)).unwrap();
        assert!(out.probes.len() <= search.max_solves);
        assert!(out.component.cardinality >= 1);
    }
}
