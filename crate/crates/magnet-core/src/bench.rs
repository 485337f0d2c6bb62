//! Recovery experiments: sweep the rescaled sample size, fit each
//! replicate with information-criterion selection, and report Hamming
//! distances to the generating graph. Includes the variant where extra
//! samples observe only each node's first attribute.

use std::time::Instant;

use crate::data::{sample_mvn, CovEstimate, Dataset};
use crate::graph::Graph;
use crate::par;
use crate::rng::mix;
use crate::select::{fit_path, lambda_grid};
use crate::simgen::{generate, theta_to_n, GraphKind, GroundTruth, Regime};
use crate::solver::SolverConfig;
use crate::{Error, Result};

/// One experiment sweep: graphs of each `(p, k)` size, sampled at each
/// `theta`, `replicates` times.
#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub kind: GraphKind,
    pub regime: Regime,
    pub p_list: Vec<usize>,
    pub k_list: Vec<usize>,
    pub thetas: Vec<f64>,
    pub replicates: usize,
    /// Penalty grid resolution for the per-replicate selection path.
    pub grid_size: usize,
    pub seed: u64,
}

impl BenchSpec {
    pub fn new(kind: GraphKind, regime: Regime) -> Self {
        BenchSpec {
            kind,
            regime,
            p_list: vec![20],
            k_list: vec![3],
            thetas: vec![1.0, 2.0, 4.0, 8.0, 13.0, 16.0],
            replicates: 20,
            grid_size: 30,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be at least 1".into()));
        }
        if self.p_list.is_empty() || self.k_list.is_empty() || self.thetas.is_empty() {
            return Err(Error::InvalidConfig(
                "p, k, and theta lists must be non-empty".into(),
            ));
        }
        if self.grid_size < 2 {
            return Err(Error::InvalidConfig("grid_size must be at least 2".into()));
        }
        for w in self.thetas.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidConfig("thetas must be strictly ascending".into()));
            }
        }
        if self.thetas.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidConfig("thetas must be positive".into()));
        }
        Ok(())
    }
}

/// Aggregate over the successful replicates of one grid cell.
/// `extra_fraction` is zero for fully observed runs; failures are
/// excluded from the means and counted separately.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub kind: GraphKind,
    pub regime: Regime,
    pub p: usize,
    pub k: usize,
    pub theta: f64,
    pub n: usize,
    pub extra_fraction: f64,
    pub mean_hamming: f64,
    pub sd_hamming: f64,
    pub exact_recovery_rate: f64,
    /// Mean wall-clock seconds per successful fit.
    pub mean_runtime: f64,
    pub failures: usize,
    pub replicates: usize,
}

struct Cell {
    p: usize,
    k: usize,
    theta: f64,
    extra_fraction: f64,
}

fn replicate_truth(spec: &BenchSpec, cell: &Cell, rep: usize) -> Result<GroundTruth> {
    let tags = [cell.p as u64, cell.k as u64, cell.theta.to_bits(), rep as u64, 0];
    generate(spec.kind, cell.p, cell.k, spec.regime, mix(spec.seed, &tags))
}

/// Fits one replicate and returns its Hamming distance and wall time, or
/// `None` on any failure (generation, degenerate covariance, solver
/// error, or a non-converged selected fit). Seeds depend only on
/// `(p, k, theta, rep)`, never on the extra fraction, so partial and full
/// observation runs of a cell share truths and base samples.
fn run_replicate(spec: &BenchSpec, cell: &Cell, rep: usize) -> Option<(usize, f64)> {
    let tags = [cell.p as u64, cell.k as u64, cell.theta.to_bits(), rep as u64, 0];
    let truth = replicate_truth(spec, cell, rep).ok()?;
    let n = theta_to_n(cell.theta, spec.kind.s(), cell.k, cell.p);
    if n < 2 {
        return None;
    }
    let data = sample_mvn(&truth.precision, n, mix(spec.seed, &[tags[0], tags[1], tags[2], tags[3], 1])).ok()?;

    let start = Instant::now();
    let cov = observed_covariance(spec, cell, &tags, &data, n).ok()?;
    let grid = lambda_grid(&cov.s, spec.grid_size).ok()?;
    let path = fit_path(&cov, &grid, &SolverConfig::new(grid[0])).ok()?;
    let best = path.best_report();
    if !best.converged {
        return None;
    }
    let est: Graph = best.edge_set();
    let elapsed = start.elapsed().as_secs_f64();
    let hamming = est.hamming_distance(&truth.graph).ok()?;
    Some((hamming, elapsed))
}

/// Covariance of the replicate's observations: the plain sample estimate
/// when no extra rows are requested, otherwise the pairwise
/// available-case estimate over base rows plus `ceil(f * n)` rows masked
/// to each node's first attribute.
fn observed_covariance(
    spec: &BenchSpec,
    cell: &Cell,
    tags: &[u64; 5],
    data: &Dataset,
    n: usize,
) -> Result<CovEstimate> {
    if cell.extra_fraction == 0.0 {
        return data.sample_covariance(true);
    }
    let truth = replicate_truth(spec, cell, tags[3] as usize)?;
    let m = (cell.extra_fraction * n as f64).ceil() as usize;
    let extra = sample_mvn(
        &truth.precision,
        m,
        mix(spec.seed, &[tags[0], tags[1], tags[2], tags[3], 2]),
    )?;
    let layout = data.layout().clone();
    let d = layout.total_dim();
    let mut values = nalgebra::DMatrix::zeros(n + m, d);
    values.view_mut((0, 0), (n, d)).copy_from(data.values());
    values.view_mut((n, 0), (m, d)).copy_from(extra.values());
    let mut mask = nalgebra::DMatrix::from_element(n + m, d, true);
    for node in 0..layout.node_count() {
        let r = layout.range(node);
        for col in r.start + 1..r.end {
            for row in n..n + m {
                mask[(row, col)] = false;
            }
        }
    }
    Dataset::with_mask(layout, values, mask)?.masked_covariance()
}

fn aggregate(spec: &BenchSpec, cell: &Cell, outcomes: &[Option<(usize, f64)>]) -> BenchRow {
    let n = theta_to_n(cell.theta, spec.kind.s(), cell.k, cell.p);
    let ok: Vec<(usize, f64)> = outcomes.iter().flatten().copied().collect();
    let cnt = ok.len();
    let (mean_hamming, sd_hamming, exact, runtime) = if cnt == 0 {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    } else {
        let mean = ok.iter().map(|&(h, _)| h as f64).sum::<f64>() / cnt as f64;
        let sd = if cnt > 1 {
            let ss: f64 = ok.iter().map(|&(h, _)| (h as f64 - mean).powi(2)).sum();
            (ss / (cnt - 1) as f64).sqrt()
        } else {
            0.0
        };
        let exact = ok.iter().filter(|&&(h, _)| h == 0).count() as f64 / cnt as f64;
        let rt = ok.iter().map(|&(_, r)| r).sum::<f64>() / cnt as f64;
        (mean, sd, exact, rt)
    };
    BenchRow {
        kind: spec.kind,
        regime: spec.regime,
        p: cell.p,
        k: cell.k,
        theta: cell.theta,
        n,
        extra_fraction: cell.extra_fraction,
        mean_hamming,
        sd_hamming,
        exact_recovery_rate: exact,
        mean_runtime: runtime,
        failures: outcomes.len() - cnt,
        replicates: outcomes.len(),
    }
}

fn run_cells(spec: &BenchSpec, cells: Vec<Cell>, jobs: usize) -> Vec<BenchRow> {
    let reps = spec.replicates;
    let outcomes = par::map_indexed(jobs, cells.len() * reps, |idx| {
        let cell = &cells[idx / reps];
        run_replicate(spec, cell, idx % reps)
    });
    cells
        .iter()
        .enumerate()
        .map(|(i, cell)| aggregate(spec, cell, &outcomes[i * reps..(i + 1) * reps]))
        .collect()
}

/// Full sweep over the spec's grid, one row per `(p, k, theta)` cell.
pub fn run_bench(spec: &BenchSpec, jobs: usize) -> Result<Vec<BenchRow>> {
    spec.validate()?;
    let mut cells = Vec::new();
    for &p in &spec.p_list {
        for &k in &spec.k_list {
            for &theta in &spec.thetas {
                cells.push(Cell {
                    p,
                    k,
                    theta,
                    extra_fraction: 0.0,
                });
            }
        }
    }
    Ok(run_cells(spec, cells, jobs))
}

/// Sweep where each cell is rerun per extra fraction, appending that many
/// first-attribute-only rows to the sample. Needs `k >= 2`; fraction 0
/// reproduces the fully observed row exactly.
pub fn run_partial_observation_bench(
    spec: &BenchSpec,
    extra_fractions: &[f64],
    jobs: usize,
) -> Result<Vec<BenchRow>> {
    spec.validate()?;
    if spec.k_list.iter().any(|&k| k < 2) {
        return Err(Error::InvalidConfig(
            "partial observation needs at least two attributes per node".into(),
        ));
    }
    if extra_fractions.is_empty() {
        return Err(Error::InvalidConfig("need at least one extra fraction".into()));
    }
    for &f in extra_fractions {
        if !(f >= 0.0 && f.is_finite()) {
            return Err(Error::InvalidConfig(
                "extra fractions must be finite and nonnegative".into(),
            ));
        }
    }
    let mut cells = Vec::new();
    for &p in &spec.p_list {
        for &k in &spec.k_list {
            for &theta in &spec.thetas {
                for &f in extra_fractions {
                    cells.push(Cell {
                        p,
                        k,
                        theta,
                        extra_fraction: f,
                    });
                }
            }
        }
    }
    Ok(run_cells(spec, cells, jobs))
}
