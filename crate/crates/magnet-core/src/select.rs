//! Penalty-level selection: BIC scoring, log-spaced grids, warm-started
//! paths, and subsample stability selection.

use alloc::string::ToString;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix};

#[allow(unused_imports)]
use num_traits::Float;

use crate::blockmat::BlockSymMatrix;
use crate::data::{CovEstimate, Dataset};
use crate::graph::Graph;
use crate::solver::{estimate, estimate_warm, SolverConfig, SolverReport};
use crate::{Error, Result};

/// Fits along a descending penalty grid. `bic[i]` scores the support of
/// `reports[i]` via its maximum-likelihood refit (see [`fit_path`]);
/// `best_index` is the argmin with ties resolved toward the larger
/// penalty (sparser model).
#[derive(Debug, Clone)]
pub struct PathResult {
    pub lambdas: Vec<f64>,
    pub reports: Vec<SolverReport>,
    pub bic: Vec<f64>,
    pub best_index: usize,
}

impl PathResult {
    pub fn best_report(&self) -> &SolverReport {
        &self.reports[self.best_index]
    }

    pub fn best_lambda(&self) -> f64 {
        self.lambdas[self.best_index]
    }
}

/// BIC score of a fitted precision matrix:
/// `n (tr(S omega) - log det omega) + sum_{a<b} 1{omega_ab != 0} k_a k_b ln n`,
/// the negative log-likelihood (times two, constants dropped) plus the
/// model-size charge. The indicator runs over strictly-upper node pairs
/// only; diagonal blocks carry no penalty. Without the sample-size factor
/// on the fit term the ln(n)-per-edge charge would swamp the O(1)
/// likelihood differences and selection would collapse to the empty
/// graph. Scores an indefinite matrix as infinity.
pub fn bic(s: &BlockSymMatrix, omega_hat: &BlockSymMatrix, n: usize) -> f64 {
    let chol = match Cholesky::new(omega_hat.as_dense().clone()) {
        Some(c) => c,
        None => return f64::INFINITY,
    };
    let mut ln_det = 0.0f64;
    {
        let l = chol.l_dirty();
        for i in 0..l.nrows() {
            ln_det += l[(i, i)].ln();
        }
    }
    let ln_det = 2.0 * ln_det;
    let fit = s.as_dense().dot(omega_hat.as_dense()) - ln_det;
    let layout = omega_hat.layout();
    let p = layout.node_count();
    let mut dof = 0usize;
    for a in 0..p {
        for b in (a + 1)..p {
            if omega_hat.block_norm(a, b).unwrap_or(0.0) > 0.0 {
                dof += layout.attr_counts()[a] * layout.attr_counts()[b];
            }
        }
    }
    n as f64 * fit + dof as f64 * (n as f64).ln()
}

/// Maximum-likelihood refit of a fixed support: minimizes
/// `tr(S omega) - log det omega` over symmetric matrices whose
/// off-diagonal blocks vanish outside `support`, by masked Newton-type
/// descent from `start` (projection onto the support subspace is just
/// entrywise masking). Returns `None` when the constrained MLE does not
/// exist (iterates diverge; typical for dense supports at small n) or the
/// line search stalls.
///
/// The stationary point satisfies `S = inv(omega)` on every retained
/// block, so the refit undoes penalty shrinkage; selection criteria
/// evaluated on it compare supports rather than shrinkage levels.
pub fn refit_support(
    s: &BlockSymMatrix,
    support: &Graph,
    start: &BlockSymMatrix,
) -> Option<BlockSymMatrix> {
    let layout = s.layout();
    let p = layout.node_count();
    let d = layout.total_dim();
    if support.node_count() != p || start.layout() != layout {
        return None;
    }
    let mask_out = |m: &mut DMatrix<f64>| {
        for a in 0..p {
            for b in (a + 1)..p {
                if !support.has_edge(a, b) {
                    let (ra, rb) = (layout.range(a), layout.range(b));
                    m.view_mut((ra.start, rb.start), (ra.len(), rb.len())).fill(0.0);
                    m.view_mut((rb.start, ra.start), (rb.len(), ra.len())).fill(0.0);
                }
            }
        }
    };
    let fit = |m: &DMatrix<f64>| -> Option<f64> {
        let chol = Cholesky::new(m.clone())?;
        let mut ln_det = 0.0;
        let l = chol.l_dirty();
        for i in 0..d {
            ln_det += l[(i, i)].ln();
        }
        Some(s.as_dense().dot(m) - 2.0 * ln_det)
    };

    let mut omega = start.as_dense().clone();
    mask_out(&mut omega);
    let mut obj = fit(&omega)?;
    let scale = s.as_dense().amax().max(1.0);
    // the objective plateaus at float resolution well before the gradient
    // can be driven arbitrarily small, so both serve as exit conditions;
    // a plateau with a still-large gradient means the search failed
    let grad_tol = 1e-7 * scale;
    let grad_ok = 1e-4 * scale;
    let mut t = 1.0f64;
    let mut flat_steps = 0usize;
    for _ in 0..2000 {
        let chol = Cholesky::new(omega.clone())?;
        let sigma = chol.inverse();
        let mut grad = s.as_dense() - &sigma;
        mask_out(&mut grad);
        let gmax = grad.amax();
        if gmax <= grad_tol || (flat_steps >= 3 && gmax <= grad_ok) {
            let half = (&omega + omega.transpose()) * 0.5;
            return BlockSymMatrix::from_dense(layout.clone(), half).ok();
        }
        // Fisher-scaled direction; t = 1 is the Newton step for the
        // unconstrained problem and masking keeps it a descent direction
        // since the gradient already lives in the masked subspace
        let mut dir = &omega * &grad * &omega;
        mask_out(&mut dir);
        let slope = grad.dot(&dir);
        loop {
            let cand = &omega - &dir * t;
            if let Some(cand_obj) = fit(&cand) {
                if cand_obj <= obj - 1e-4 * t * slope {
                    if obj - cand_obj <= 1e-12 * (1.0 + obj.abs()) {
                        flat_steps += 1;
                    } else {
                        flat_steps = 0;
                    }
                    omega = cand;
                    obj = cand_obj;
                    t = (t * 2.0).min(1.0);
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-14 {
                // float plateau: accept if already near-stationary
                if gmax <= grad_ok {
                    let half = (&omega + omega.transpose()) * 0.5;
                    return BlockSymMatrix::from_dense(layout.clone(), half).ok();
                }
                return None;
            }
        }
        if omega.norm() > 1e9 {
            return None; // diverging: constrained MLE does not exist
        }
    }
    None
}

/// Log-spaced descending grid from `lambda_max = max_offdiag_block_norm(S)`
/// (where the estimated graph is empty) down to `lambda_max / 100`. When the
/// input has no off-diagonal signal at all there is no meaningful scale and
/// the grid collapses to a single point anchored on the diagonal blocks;
/// callers can detect that by the shortened length.
pub fn lambda_grid(s: &BlockSymMatrix, count: usize) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::InvalidConfig(
            "penalty grid needs at least 2 points".to_string(),
        ));
    }
    let lam_max = s.max_offdiag_block_norm();
    if lam_max <= 0.0 {
        let p = s.node_count();
        let mut diag_scale = 0.0f64;
        for a in 0..p {
            diag_scale += s.block_norm(a, a)?;
        }
        diag_scale /= p as f64;
        return Ok(alloc::vec![(diag_scale.max(f64::MIN_POSITIVE)) / 100.0]);
    }
    let lo = lam_max / 100.0;
    let ratio = (lo / lam_max).ln();
    let mut grid = Vec::with_capacity(count);
    for i in 0..count {
        let t = i as f64 / (count - 1) as f64;
        grid.push(lam_max * (ratio * t).exp());
    }
    grid[0] = lam_max;
    grid[count - 1] = lo;
    Ok(grid)
}

fn check_descending(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty penalty grid".to_string()));
    }
    for w in grid.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::InvalidConfig(
                "penalty grid must be strictly decreasing".to_string(),
            ));
        }
    }
    if !(grid[grid.len() - 1] > 0.0) {
        return Err(Error::InvalidConfig(
            "penalty grid values must be positive".to_string(),
        ));
    }
    Ok(())
}

pub(crate) fn pick_best(bic: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &v) in bic.iter().enumerate() {
        if v < bic[best] {
            best = i;
        }
    }
    best
}

/// Fits every penalty in the (descending) grid, warm-starting each solve
/// from the previous solution pair. `cfg.lambda` is overridden by the grid;
/// everything else (epsilon, sweep budget) applies to each fit. The sample
/// size for BIC is taken from the covariance estimate.
///
/// Each grid point is scored by the BIC of the maximum-likelihood refit
/// of its support, not of the penalized estimate itself: shrinkage bias
/// shrinks as the penalty does, so scoring the penalized fits directly
/// always favors a denser graph than the true support. Supports whose
/// refit does not exist score as infinity; consecutive duplicate supports
/// share one refit.
pub fn fit_path(cov: &CovEstimate, grid: &[f64], cfg: &SolverConfig) -> Result<PathResult> {
    check_descending(grid)?;
    let mut reports: Vec<SolverReport> = Vec::with_capacity(grid.len());
    let mut scores: Vec<f64> = Vec::with_capacity(grid.len());
    let mut cached: Option<(Graph, f64)> = None;
    for (i, &lam) in grid.iter().enumerate() {
        let mut step_cfg = cfg.clone();
        step_cfg.lambda = lam;
        let rep = if let Some(prev) = reports.last() {
            let extrapolated = (i >= 2).then(|| {
                // Secant continuation through the two previous solutions:
                // second-order accurate in the grid spacing, versus first
                // order for the previous solution alone. Blocks at zero in
                // both stay exactly zero.
                let r = (grid[i - 1] - lam) / (grid[i - 2] - grid[i - 1]);
                let prev2 = &reports[i - 2];
                let dense = prev.omega_hat.as_dense()
                    + (prev.omega_hat.as_dense() - prev2.omega_hat.as_dense()) * r;
                BlockSymMatrix::from_dense_unchecked(cov.s.layout().clone(), dense)
            });
            let extrapolated_fit = extrapolated.and_then(|guess| {
                match estimate_warm(&cov.s, &step_cfg, &guess, None) {
                    Ok(rep) => Some(Ok(rep)),
                    // Continuation can overshoot positive definiteness when
                    // the support is changing; the previous solution is
                    // always a valid start.
                    Err(Error::NonPositiveDefinite { .. }) => None,
                    Err(e) => Some(Err(e)),
                }
            });
            match extrapolated_fit {
                Some(rep) => rep?,
                None => estimate_warm(&cov.s, &step_cfg, &prev.omega_hat, Some(&prev.sigma_hat))?,
            }
        } else {
            estimate(&cov.s, &step_cfg)?
        };
        let support = rep.edge_set();
        let score = match &cached {
            Some((g, score)) if *g == support => *score,
            _ => {
                let score = refit_support(&cov.s, &support, &rep.omega_hat)
                    .map(|refit| bic(&cov.s, &refit, cov.n))
                    .unwrap_or(f64::INFINITY);
                cached = Some((support, score));
                score
            }
        };
        scores.push(score);
        reports.push(rep);
        debug_assert_eq!(reports.len(), i + 1);
    }
    let best_index = pick_best(&scores);
    Ok(PathResult {
        lambdas: grid.to_vec(),
        reports,
        bic: scores,
        best_index,
    })
}

/// Knobs for [`stability_select`]; the defaults follow the
/// 100-replicate / 80% subsample / 95-count protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityConfig {
    pub reps: usize,
    pub fraction: f64,
    pub threshold: usize,
    pub seed: u64,
    /// Center each subsample before covariance estimation.
    pub center: bool,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            reps: 100,
            fraction: 0.8,
            threshold: 95,
            seed: 0,
            center: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StabilityResult {
    /// Symmetric per-pair appearance counts over the successful replicates.
    pub edge_counts: DMatrix<usize>,
    pub stable_edges: Graph,
    pub reps: usize,
    pub subsample_fraction: f64,
    pub threshold: usize,
    /// Replicates whose covariance was degenerate or whose solve failed or
    /// did not converge. Failures lower the attainable counts; they never
    /// lower the threshold.
    pub failed_replicates: usize,
}

fn stability_validate(data: &Dataset, cfg: &StabilityConfig) -> Result<usize> {
    if !(cfg.fraction > 0.0 && cfg.fraction <= 1.0) {
        return Err(Error::InvalidConfig(
            "subsample fraction must lie in (0, 1]".to_string(),
        ));
    }
    let m = (cfg.fraction * data.n() as f64).floor() as usize;
    if m < 2 {
        return Err(Error::InvalidConfig(alloc::format!(
            "subsample size {m} is too small (need at least 2 rows)"
        )));
    }
    if cfg.reps == 0 || cfg.threshold > cfg.reps {
        return Err(Error::InvalidConfig(
            "need reps >= 1 and threshold <= reps".to_string(),
        ));
    }
    Ok(m)
}

/// One replicate: seeded subsample, covariance, solve; returns the edge set
/// or `None` on any failure (degenerate covariance, solver error, or a fit
/// that hit the sweep budget without converging).
fn stability_replicate(
    data: &Dataset,
    solver_cfg: &SolverConfig,
    cfg: &StabilityConfig,
    m: usize,
    rep: usize,
) -> Option<Graph> {
    let mut rng = crate::rng::substream(cfg.seed, rep as u64);
    let mut idx: Vec<usize> =
        rand::seq::index::sample(&mut rng, data.n(), m).into_iter().collect();
    // ascending order fixes the float summation order in the covariance
    idx.sort_unstable();
    let sub = data.subsample(&idx).ok()?;
    let cov = if sub.is_fully_observed() {
        sub.sample_covariance(cfg.center).ok()?
    } else {
        // pairwise means are built into the masked estimator
        sub.masked_covariance().ok()?
    };
    let rep = crate::screening::estimate_screened(&cov.s, solver_cfg).ok()?;
    if !rep.converged {
        return None;
    }
    Some(rep.edge_set())
}

pub(crate) fn aggregate_counts(
    node_count: usize,
    edge_sets: &[Option<Graph>],
    threshold: usize,
) -> (DMatrix<usize>, Graph, usize) {
    let mut counts = DMatrix::zeros(node_count, node_count);
    let mut failed = 0usize;
    for es in edge_sets {
        match es {
            Some(g) => {
                for (a, b) in g.edges() {
                    counts[(a, b)] += 1;
                    counts[(b, a)] += 1;
                }
            }
            None => failed += 1,
        }
    }
    let mut stable = Graph::new(node_count);
    for a in 0..node_count {
        for b in (a + 1)..node_count {
            if counts[(a, b)] >= threshold {
                stable.add_edge(a, b).expect("indices in range");
            }
        }
    }
    (counts, stable, failed)
}

fn stability_finish(
    data: &Dataset,
    cfg: &StabilityConfig,
    edge_sets: Vec<Option<Graph>>,
) -> Result<StabilityResult> {
    let p = data.layout().node_count();
    let (edge_counts, stable_edges, failed) = aggregate_counts(p, &edge_sets, cfg.threshold);
    if failed as f64 > 0.1 * cfg.reps as f64 {
        return Err(Error::ReplicateFailures {
            failed,
            total: cfg.reps,
        });
    }
    Ok(StabilityResult {
        edge_counts,
        stable_edges,
        reps: cfg.reps,
        subsample_fraction: cfg.fraction,
        threshold: cfg.threshold,
        failed_replicates: failed,
    })
}

/// Repeats the fit on `reps` seeded subsamples at a fixed penalty
/// (`solver_cfg.lambda`) and keeps the edges appearing at least `threshold`
/// times. Replicate `r` draws from an RNG substream indexed by `r`, so
/// results do not depend on execution order. Errors when more than 10% of
/// the replicates fail.
pub fn stability_select(
    data: &Dataset,
    solver_cfg: &SolverConfig,
    cfg: &StabilityConfig,
) -> Result<StabilityResult> {
    solver_cfg.validate()?;
    let m = stability_validate(data, cfg)?;
    let edge_sets: Vec<Option<Graph>> = (0..cfg.reps)
        .map(|r| stability_replicate(data, solver_cfg, cfg, m, r))
        .collect();
    stability_finish(data, cfg, edge_sets)
}

/// [`stability_select`] with replicates fanned out over `jobs` threads;
/// identical output for any `jobs`.
#[cfg(feature = "std")]
pub fn stability_select_jobs(
    data: &Dataset,
    solver_cfg: &SolverConfig,
    cfg: &StabilityConfig,
    jobs: usize,
) -> Result<StabilityResult> {
    solver_cfg.validate()?;
    let m = stability_validate(data, cfg)?;
    let edge_sets = crate::par::map_indexed(jobs, cfg.reps, |r| {
        stability_replicate(data, solver_cfg, cfg, m, r)
    });
    stability_finish(data, cfg, edge_sets)
}
