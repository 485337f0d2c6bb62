//! Covariance screening: the solution is block diagonal across the
//! connected components of the graph with adjacency `||S_ab||_F > lambda`,
//! so each component can be solved independently and the results assembled.
//! Screening never changes the answer, only the cost.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::blockmat::BlockSymMatrix;
use crate::graph::Graph;
use crate::layout::AttributeLayout;
use crate::solver::{estimate, SolverConfig, SolverReport};
use crate::{Error, Result};

/// Partition of the nodes into groups that cannot share an edge in the
/// solution at the given penalty. Components are listed by smallest member
/// with members ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentPartition {
    components: Vec<Vec<usize>>,
    lambda: f64,
}

impl ComponentPartition {
    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Index of the component containing `node`.
    pub fn component_of(&self, node: usize) -> Option<usize> {
        self.components.iter().position(|c| c.binary_search(&node).is_ok())
    }
}

/// Connected components of the thresholded block-norm graph. The comparison
/// is strict, so a block sitting exactly at `lambda` does not join nodes
/// (matching the zero-block condition on the solution side, which is an
/// inequality that includes equality).
pub fn screen(s: &BlockSymMatrix, lambda: f64) -> Result<ComponentPartition> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidConfig(alloc::format!(
            "screening threshold must be nonnegative, got {lambda}"
        )));
    }
    let p = s.node_count();
    let mut g = Graph::new(p);
    for a in 0..p {
        for b in (a + 1)..p {
            if s.block_norm(a, b)? > lambda {
                g.add_edge(a, b)?;
            }
        }
    }
    Ok(ComponentPartition {
        components: g.connected_components(),
        lambda,
    })
}

/// Solves the penalized problem per screening component and assembles the
/// full-size solution. Identical (up to solver tolerance) to [`estimate`]
/// on the whole matrix; each component gets an `epsilon` share of
/// `cfg.epsilon / n_components` so the assembled duality gap, which is the
/// sum of the component gaps, still meets `cfg.epsilon`.
pub fn estimate_screened(s: &BlockSymMatrix, cfg: &SolverConfig) -> Result<SolverReport> {
    cfg.validate()?;
    let partition = screen(s, cfg.lambda)?;
    let reports: Vec<Result<SolverReport>> = partition
        .components()
        .iter()
        .map(|comp| solve_component(s, cfg, comp, partition.n_components()))
        .collect();
    assemble(s.layout(), &partition, reports)
}

/// Parallel variant: component solves fan out over `jobs` threads; the
/// merge order is fixed by the partition, so the result is identical to the
/// sequential one.
#[cfg(feature = "std")]
pub fn estimate_screened_jobs(
    s: &BlockSymMatrix,
    cfg: &SolverConfig,
    jobs: usize,
) -> Result<SolverReport> {
    cfg.validate()?;
    let partition = screen(s, cfg.lambda)?;
    let comps = partition.components();
    let reports = crate::par::map_indexed(jobs, comps.len(), |i| {
        solve_component(s, cfg, &comps[i], partition.n_components())
    });
    assemble(s.layout(), &partition, reports)
}

fn solve_component(
    s: &BlockSymMatrix,
    cfg: &SolverConfig,
    comp: &[usize],
    n_components: usize,
) -> Result<SolverReport> {
    let sub_layout = s.layout().restrict(comp)?;
    let sub_dim = sub_layout.total_dim();
    let mut sub = DMatrix::zeros(sub_dim, sub_dim);
    for (ia, &a) in comp.iter().enumerate() {
        let ga = s.layout().range(a);
        let sa = sub_layout.range(ia);
        for (ib, &b) in comp.iter().enumerate() {
            let gb = s.layout().range(b);
            let sb = sub_layout.range(ib);
            sub.view_mut((sa.start, sb.start), (sa.len(), sb.len())).copy_from(
                &s.as_dense().view((ga.start, gb.start), (ga.len(), gb.len())),
            );
        }
    }
    let sub_s = BlockSymMatrix::from_dense(sub_layout, sub)?;
    let mut sub_cfg = cfg.clone();
    sub_cfg.epsilon = cfg.epsilon / n_components as f64;
    estimate(&sub_s, &sub_cfg)
}

fn assemble(
    layout: &AttributeLayout,
    partition: &ComponentPartition,
    reports: Vec<Result<SolverReport>>,
) -> Result<SolverReport> {
    let d = layout.total_dim();
    let mut omega = DMatrix::zeros(d, d);
    let mut sigma = DMatrix::zeros(d, d);
    let mut sweeps = 0usize;
    let mut halvings = 0usize;
    let mut converged = true;
    let mut gap_sum = Some(0.0f64);
    let mut finals = Vec::with_capacity(reports.len());
    let mut initials = Vec::with_capacity(reports.len());
    let mut unpacked = Vec::with_capacity(reports.len());
    for rep in reports {
        let rep = rep?;
        initials.push(rep.objective_trace[0]);
        finals.push(rep.objective_final());
        sweeps = sweeps.max(rep.sweeps);
        halvings += rep.step_halvings;
        converged &= rep.converged;
        gap_sum = match (gap_sum, rep.final_gap) {
            (Some(acc), Some(g)) => Some(acc + g),
            _ => None,
        };
        unpacked.push(rep);
    }
    // Scatter component solutions; cross-component blocks stay zero.
    for (ci, comp) in partition.components().iter().enumerate() {
        let rep = &unpacked[ci];
        let sub_layout = rep.omega_hat.layout();
        for (ia, &a) in comp.iter().enumerate() {
            let ga = layout.range(a);
            let sa = sub_layout.range(ia);
            for (ib, &b) in comp.iter().enumerate() {
                let gb = layout.range(b);
                let sb = sub_layout.range(ib);
                omega
                    .view_mut((ga.start, gb.start), (ga.len(), gb.len()))
                    .copy_from(&rep.omega_hat.as_dense().view(
                        (sa.start, sb.start),
                        (sa.len(), sb.len()),
                    ));
                sigma
                    .view_mut((ga.start, gb.start), (ga.len(), gb.len()))
                    .copy_from(&rep.sigma_hat.as_dense().view(
                        (sa.start, sb.start),
                        (sa.len(), sb.len()),
                    ));
            }
        }
    }
    // The full objective separates across components, so the assembled
    // trace is each component's descent run in turn, shifted by the other
    // components' objective at that moment (initial for those not yet
    // solved, final for those already solved). The concatenation is then
    // non-increasing like each component trace.
    let total_initial: f64 = initials.iter().sum();
    let mut trace = Vec::with_capacity(
        1 + unpacked.iter().map(|r| r.objective_trace.len() - 1).sum::<usize>(),
    );
    trace.push(total_initial);
    let mut solved_shift = 0.0f64;
    let mut pending_shift: f64 = initials.iter().sum();
    for (ci, rep) in unpacked.iter().enumerate() {
        pending_shift -= initials[ci];
        let shift = solved_shift + pending_shift;
        for &v in rep.objective_trace.iter().skip(1) {
            trace.push(v + shift);
        }
        solved_shift += finals[ci];
    }
    Ok(SolverReport {
        omega_hat: BlockSymMatrix::from_dense_unchecked(layout.clone(), omega),
        sigma_hat: BlockSymMatrix::from_dense_unchecked(layout.clone(), sigma),
        objective_trace: trace,
        final_gap: gap_sum,
        sweeps,
        step_halvings: halvings,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::OBJ_DECREASE_TOL;
    use approx::assert_abs_diff_eq;

    fn two_component_cov() -> BlockSymMatrix {
        // Nodes {0,1} coupled, node {2} isolated at any lambda above 0.2.
        let l = AttributeLayout::uniform(3, 1).unwrap();
        let m = nalgebra::dmatrix![
            1.0, 0.6, 0.1;
            0.6, 1.0, 0.15;
            0.1, 0.15, 1.0;
        ];
        BlockSymMatrix::from_dense(l, m).unwrap()
    }

    #[test]
    fn thresholds_partition_as_expected() {
        let s = two_component_cov();
        let parts = screen(&s, 0.3).unwrap();
        assert_eq!(parts.components(), &[vec![0, 1], vec![2]]);
        assert_eq!(parts.component_of(2), Some(1));

        // everything isolated above the largest off-diagonal norm
        let all = screen(&s, 0.7).unwrap();
        assert_eq!(all.n_components(), 3);

        // all blocks nonzero at lambda = 0 -> single component
        let one = screen(&s, 0.0).unwrap();
        assert_eq!(one.n_components(), 1);
        assert_eq!(one.components()[0], vec![0, 1, 2]);
    }

    #[test]
    fn tie_at_lambda_is_screened_out() {
        let s = two_component_cov();
        // block (0,1) norm is exactly 0.6; strict comparison keeps them apart
        let parts = screen(&s, 0.6).unwrap();
        assert_eq!(parts.n_components(), 3);
    }

    #[test]
    fn negative_lambda_rejected() {
        let s = two_component_cov();
        assert!(screen(&s, -0.1).is_err());
        assert!(screen(&s, f64::NAN).is_err());
    }

    #[test]
    fn partitions_nest_as_lambda_grows() {
        let s = crate::solver::tests_support::random_cov(8, 2, 123);
        let lams = [0.0, 0.05, 0.1, 0.2, 0.4, 0.8];
        for w in lams.windows(2) {
            let coarse = screen(&s, w[0]).unwrap();
            let fine = screen(&s, w[1]).unwrap();
            for comp in fine.components() {
                let home = coarse.component_of(comp[0]).unwrap();
                assert!(comp
                    .iter()
                    .all(|&n| coarse.component_of(n) == Some(home)));
            }
        }
    }

    #[test]
    fn screened_solution_is_blockwise_zero_across_components() {
        let s = two_component_cov();
        let cfg = SolverConfig::new(0.3);
        let rep = estimate_screened(&s, &cfg).unwrap();
        assert_eq!(rep.omega_hat.as_dense()[(0, 2)], 0.0);
        assert_eq!(rep.omega_hat.as_dense()[(1, 2)], 0.0);
        assert!(rep.converged);
        assert!(rep.final_gap.unwrap() <= cfg.epsilon);
    }

    #[test]
    fn screened_matches_unscreened() {
        let s = crate::solver::tests_support::random_cov(12, 2, 7);
        // pick a lambda that actually splits the graph
        let mut lambda = None;
        for cand in [0.12, 0.16, 0.2, 0.25, 0.3, 0.4] {
            let parts = screen(&s, cand).unwrap();
            if parts.n_components() >= 3 && parts.n_components() < 12 {
                lambda = Some(cand);
                break;
            }
        }
        let lambda = lambda.expect("no splitting lambda found for this seed");
        let cfg = SolverConfig::new(lambda).with_epsilon(1e-11).with_max_sweeps(20000);
        let full = estimate(&s, &cfg).unwrap();
        let scr = estimate_screened(&s, &cfg).unwrap();
        let d = s.dim();
        for i in 0..d {
            for j in 0..d {
                assert_abs_diff_eq!(
                    full.omega_hat.as_dense()[(i, j)],
                    scr.omega_hat.as_dense()[(i, j)],
                    epsilon = 1e-5
                );
            }
        }
        assert_eq!(full.edge_set(), scr.edge_set());
    }

    #[test]
    fn assembled_trace_is_monotone_and_lands_on_the_true_objective() {
        let s = crate::solver::tests_support::random_cov(9, 1, 33);
        let cfg = SolverConfig::new(0.25);
        let rep = estimate_screened(&s, &cfg).unwrap();
        for w in rep.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + OBJ_DECREASE_TOL);
        }
        let direct = crate::solver::objective(&s, &rep.omega_hat, cfg.lambda).unwrap();
        assert_abs_diff_eq!(rep.objective_final(), direct, epsilon = 1e-9);
    }

    #[cfg(feature = "std")]
    #[test]
    fn parallel_solve_matches_sequential() {
        let s = crate::solver::tests_support::random_cov(10, 2, 21);
        let cfg = SolverConfig::new(0.2);
        let seq = estimate_screened(&s, &cfg).unwrap();
        let par = estimate_screened_jobs(&s, &cfg, 4).unwrap();
        assert_eq!(seq.omega_hat.as_dense(), par.omega_hat.as_dense());
        assert_eq!(seq.objective_trace, par.objective_trace);
    }
}
