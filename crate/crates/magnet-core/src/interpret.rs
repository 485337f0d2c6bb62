//! Edge post-processing: Markov blankets, residual-based conditional
//! correlation, the partial-canonical-correlation eigensystem, and the
//! weight-based edge/node classification heuristic.

use alloc::string::ToString;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector};

#[allow(unused_imports)]
use num_traits::Float;

use crate::blockmat::BlockSymMatrix;
use crate::data::Dataset;
use crate::graph::Graph;
use crate::layout::AttributeLayout;
use crate::{Error, Result};

/// Strength and attribute weights of one edge. `rho` is the estimated
/// partial canonical correlation in `[0, 1]`; the weight vectors are unit
/// norm with the largest-magnitude entry made positive (each vector
/// independently, so `rho` carries the magnitude and the signs are purely a
/// reporting convention). `degenerate` marks a zero cross-correlation
/// block, where the weights are an arbitrary basis vector.
#[derive(Debug, Clone)]
pub struct EdgeInterpretation {
    pub edge: (usize, usize),
    pub rho: f64,
    pub w_a: DVector<f64>,
    pub w_b: DVector<f64>,
    pub degenerate: bool,
}

/// Nodes with a nonzero precision block to either endpoint; the endpoints
/// themselves are excluded. Conditioning on this set is equivalent to
/// conditioning on all remaining nodes.
pub fn markov_blanket(graph: &Graph, a: usize, b: usize) -> Result<Vec<usize>> {
    if a == b {
        return Err(Error::InvalidConfig(
            "markov blanket needs two distinct nodes".to_string(),
        ));
    }
    if a >= graph.node_count() || b >= graph.node_count() {
        return Err(Error::NodeOutOfRange {
            index: a.max(b),
            node_count: graph.node_count(),
        });
    }
    let mut out: Vec<usize> = graph
        .neighbors(a)
        .into_iter()
        .chain(graph.neighbors(b))
        .filter(|&c| c != a && c != b)
        .collect();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Correlation matrix of the least-squares residuals of nodes `a` and `b`
/// regressed on the stacked blanket attributes, returned as a two-node
/// block matrix (`a` first). All columns are centered, so the regression
/// has an implicit intercept; an empty blanket reduces to the plain
/// correlation of the two nodes' attributes.
///
/// `ridge >= 0` is added to the Gram diagonal; with `ridge = 0` a
/// rank-deficient design is an error suggesting the flag.
pub fn conditional_cov(
    data: &Dataset,
    a: usize,
    b: usize,
    blanket: &[usize],
    ridge: f64,
) -> Result<BlockSymMatrix> {
    let layout = data.layout();
    layout.check_node(a)?;
    layout.check_node(b)?;
    if a == b {
        return Err(Error::InvalidConfig(
            "conditional covariance needs two distinct nodes".to_string(),
        ));
    }
    if !data.is_fully_observed() {
        return Err(Error::InvalidConfig(
            "edge interpretation requires fully observed data".to_string(),
        ));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidConfig("ridge must be nonnegative".to_string()));
    }
    for &c in blanket {
        layout.check_node(c)?;
        if c == a || c == b {
            return Err(Error::InvalidConfig(
                "blanket must not contain the edge endpoints".to_string(),
            ));
        }
    }
    let n = data.n();
    let ka = layout.attr_counts()[a];
    let kb = layout.attr_counts()[b];
    let q: usize = blanket.iter().map(|&c| layout.attr_counts()[c]).sum();
    if n <= q + ka + kb {
        return Err(Error::InvalidConfig(alloc::format!(
            "need more than {} samples to interpret this edge, got {n}",
            q + ka + kb
        )));
    }

    let gather = |nodes: &[usize]| -> DMatrix<f64> {
        let cols: usize = nodes.iter().map(|&c| layout.attr_counts()[c]).sum();
        let mut m = DMatrix::zeros(n, cols);
        let mut at = 0usize;
        for &c in nodes {
            let r = layout.range(c);
            m.view_mut((0, at), (n, r.len()))
                .copy_from(&data.values().view((0, r.start), (n, r.len())));
            at += r.len();
        }
        center_columns(&mut m);
        m
    };

    let y = gather(&[a, b]);
    let orig_var: Vec<f64> = (0..ka + kb)
        .map(|j| y.column(j).norm_squared() / n as f64)
        .collect();
    let resid = if q == 0 {
        y
    } else {
        let x = gather(blanket);
        let mut gram = x.transpose() * &x;
        if ridge == 0.0 {
            let eig = gram.clone().symmetric_eigen();
            let max_ev = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
            let min_ev = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            if !(min_ev > 1e-12 * max_ev.max(f64::MIN_POSITIVE)) {
                return Err(Error::RankDeficientDesign);
            }
        } else {
            for i in 0..q {
                gram[(i, i)] += ridge;
            }
        }
        let chol = Cholesky::new(gram).ok_or(Error::RankDeficientDesign)?;
        let beta = chol.solve(&(x.transpose() * &y));
        y - x * beta
    };

    // residual columns have exact zero mean up to rounding; subtract the
    // leftover means so the correlation is exact
    let mut resid = resid;
    center_columns(&mut resid);
    let k = ka + kb;
    let cov = resid.transpose() * &resid / n as f64;
    let mut sd = Vec::with_capacity(k);
    for i in 0..k {
        let v = cov[(i, i)];
        // a residual variance at rounding-noise scale relative to the raw
        // column means the attribute is (numerically) determined by the
        // blanket, and its correlations would be garbage
        if !(v > 1e-12 * orig_var[i]) || orig_var[i] == 0.0 {
            let node = if i < ka { a } else { b };
            return Err(Error::DegenerateResidual { node });
        }
        sd.push(v.sqrt());
    }
    let mut corr = DMatrix::zeros(k, k);
    for i in 0..k {
        corr[(i, i)] = 1.0;
        for j in (i + 1)..k {
            let c = cov[(i, j)] / (sd[i] * sd[j]);
            corr[(i, j)] = c;
            corr[(j, i)] = c;
        }
    }
    let out_layout = AttributeLayout::new(alloc::vec![ka, kb])?;
    BlockSymMatrix::from_dense(out_layout, corr)
}

fn center_columns(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return;
    }
    for j in 0..m.ncols() {
        let mean = m.column(j).sum() / n as f64;
        for i in 0..n {
            m[(i, j)] -= mean;
        }
    }
}

/// Solves the two-sided eigensystem of a two-node conditional correlation
/// matrix. Internally whitens the cross block, `T = L_a^{-1} C_ab
/// L_b^{-T}`, whose largest singular value is the partial canonical
/// correlation and whose singular vectors map back to the weight vectors;
/// both one-sided eigenproblems share this top eigenvalue by construction.
pub fn pcc_eigensystem(cond: &BlockSymMatrix) -> Result<EdgeInterpretation> {
    if cond.node_count() != 2 {
        return Err(Error::InvalidConfig(
            "expected a two-node conditional matrix".to_string(),
        ));
    }
    let caa = cond.block(0, 0)?;
    let cab = cond.block(0, 1)?;
    let cbb = cond.block(1, 1)?;
    let ka = caa.nrows();
    let kb = cbb.nrows();
    let chol_a = Cholesky::new(caa).ok_or_else(|| Error::NonPositiveDefinite {
        context: "conditional correlation block of the first endpoint".to_string(),
    })?;
    let chol_b = Cholesky::new(cbb).ok_or_else(|| Error::NonPositiveDefinite {
        context: "conditional correlation block of the second endpoint".to_string(),
    })?;
    let la = chol_a.l();
    let lb = chol_b.l();
    let half = la
        .solve_lower_triangular(&cab)
        .ok_or_else(|| Error::NonPositiveDefinite {
            context: "whitening the first endpoint".to_string(),
        })?;
    let t = lb
        .solve_lower_triangular(&half.transpose())
        .ok_or_else(|| Error::NonPositiveDefinite {
            context: "whitening the second endpoint".to_string(),
        })?
        .transpose();

    let svd = t.svd(true, true);
    let mut top = 0usize;
    for i in 0..svd.singular_values.len() {
        if svd.singular_values[i] > svd.singular_values[top] {
            top = i;
        }
    }
    let sigma = svd.singular_values[top];
    if sigma == 0.0 {
        let mut w_a = DVector::zeros(ka);
        w_a[0] = 1.0;
        let mut w_b = DVector::zeros(kb);
        w_b[0] = 1.0;
        return Ok(EdgeInterpretation {
            edge: (0, 1),
            rho: 0.0,
            w_a,
            w_b,
            degenerate: true,
        });
    }
    let u = svd.u.as_ref().expect("svd with u").column(top).into_owned();
    let v = svd
        .v_t
        .as_ref()
        .expect("svd with v_t")
        .row(top)
        .transpose()
        .into_owned();
    let w_a = unit_signed(
        la.transpose()
            .solve_upper_triangular(&u)
            .ok_or_else(|| Error::NonPositiveDefinite {
                context: "back-transforming the first weight vector".to_string(),
            })?,
    );
    let w_b = unit_signed(
        lb.transpose()
            .solve_upper_triangular(&v)
            .ok_or_else(|| Error::NonPositiveDefinite {
                context: "back-transforming the second weight vector".to_string(),
            })?,
    );
    Ok(EdgeInterpretation {
        edge: (0, 1),
        // the bound holds for any correlation input; clamp rounding spill
        rho: sigma.min(1.0),
        w_a,
        w_b,
        degenerate: false,
    })
}

fn unit_signed(mut w: DVector<f64>) -> DVector<f64> {
    let nrm = w.norm();
    if nrm > 0.0 {
        w /= nrm;
    }
    let mut lead = 0usize;
    for i in 0..w.len() {
        if w[i].abs() > w[lead].abs() {
            lead = i;
        }
    }
    if w[lead] < 0.0 {
        w = -w;
    }
    w
}

/// Blanket + residual correlation + eigensystem for one estimated edge.
pub fn interpret_edge(
    data: &Dataset,
    graph: &Graph,
    a: usize,
    b: usize,
    ridge: f64,
) -> Result<EdgeInterpretation> {
    let blanket = markov_blanket(graph, a, b)?;
    let cond = conditional_cov(data, a, b, &blanket, ridge)?;
    let mut interp = pcc_eigensystem(&cond)?;
    interp.edge = (a.min(b), a.max(b));
    Ok(interp)
}

/// Interprets every edge of the graph, in edge order.
pub fn interpret_all(data: &Dataset, graph: &Graph, ridge: f64) -> Result<Vec<EdgeInterpretation>> {
    graph
        .edges()
        .map(|(a, b)| interpret_edge(data, graph, a, b, ridge))
        .collect()
}

/// Which side of the weight spectrum an edge falls on, judged by one
/// designated attribute's squared weight: below `T` the designated
/// attribute contributes little (the complementary attributes carry the
/// edge), above `1 - T` it dominates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeClassLabel {
    Complement,
    Designated,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeClass {
    pub label: EdgeClassLabel,
    /// Squared weight of the designated attribute in the first endpoint's
    /// unit weight vector.
    pub w_sq: f64,
}

/// Classifies edges by the squared designated-attribute weight of the
/// first (smaller-index) endpoint's vector, against the bands `[0, T)`,
/// `(1-T, 1]`, and the middle. `T` must lie in `(0, 0.5]`; both band
/// boundaries themselves read as mixed.
pub fn classify_edges(
    interps: &[EdgeInterpretation],
    layout: &AttributeLayout,
    attr_index: usize,
    t: f64,
) -> Result<Vec<EdgeClass>> {
    if !(t > 0.0 && t <= 0.5) {
        return Err(Error::InvalidConfig(
            "classification threshold must lie in (0, 0.5]".to_string(),
        ));
    }
    interps
        .iter()
        .map(|interp| {
            let (a, _) = interp.edge;
            if attr_index >= layout.attr_counts()[a] {
                return Err(Error::InvalidConfig(alloc::format!(
                    "attribute index {attr_index} out of range for node {a}"
                )));
            }
            let w_sq = interp.w_a[attr_index] * interp.w_a[attr_index];
            let label = if w_sq < t {
                EdgeClassLabel::Complement
            } else if w_sq > 1.0 - t {
                EdgeClassLabel::Designated
            } else {
                EdgeClassLabel::Mixed
            };
            Ok(EdgeClass { label, w_sq })
        })
        .collect()
}

/// Per-node proportions of incident edge classes; sums to one for any node
/// with at least one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeClass {
    pub complement: f64,
    pub designated: f64,
    pub mixed: f64,
}

/// Aggregates edge classes onto nodes. `classes[i]` must describe the
/// `i`-th edge of `graph` (as produced by [`classify_edges`] on
/// [`interpret_all`] output). Isolated nodes have no defined proportions
/// and come back as `None`.
pub fn classify_nodes(graph: &Graph, classes: &[EdgeClass]) -> Result<Vec<Option<NodeClass>>> {
    if classes.len() != graph.edge_count() {
        return Err(Error::DimensionMismatch {
            expected: graph.edge_count(),
            got: classes.len(),
            context: "one class per graph edge",
        });
    }
    let p = graph.node_count();
    let mut tally = alloc::vec![[0usize; 3]; p];
    for ((a, b), class) in graph.edges().zip(classes) {
        let slot = match class.label {
            EdgeClassLabel::Complement => 0,
            EdgeClassLabel::Designated => 1,
            EdgeClassLabel::Mixed => 2,
        };
        tally[a][slot] += 1;
        tally[b][slot] += 1;
    }
    Ok(tally
        .into_iter()
        .map(|t| {
            let total = (t[0] + t[1] + t[2]) as f64;
            if total == 0.0 {
                None
            } else {
                Some(NodeClass {
                    complement: t[0] as f64 / total,
                    designated: t[1] as f64 / total,
                    mixed: t[2] as f64 / total,
                })
            }
        })
        .collect())
}

/// Population check that the conditional cross-covariance of a node pair
/// and the corresponding precision block vanish together. Returns
/// `(conditional_cross_zero, precision_block_zero)`; the two flags agree
/// for any positive definite input.
pub fn verify_block_zero_equivalence(
    sigma: &BlockSymMatrix,
    a: usize,
    b: usize,
) -> Result<(bool, bool)> {
    let layout = sigma.layout();
    layout.check_node(a)?;
    layout.check_node(b)?;
    if a == b {
        return Err(Error::InvalidConfig(
            "equivalence check needs two distinct nodes".to_string(),
        ));
    }
    let d = layout.total_dim();
    let ra = layout.range(a);
    let rb = layout.range(b);
    let ka = ra.len();
    let kb = rb.len();
    let pair: Vec<usize> = ra.clone().chain(rb.clone()).collect();
    let rest: Vec<usize> = (0..d).filter(|i| !ra.contains(i) && !rb.contains(i)).collect();

    let dense = sigma.as_dense();
    let mut s_pair = DMatrix::zeros(ka + kb, ka + kb);
    for (i, &gi) in pair.iter().enumerate() {
        for (j, &gj) in pair.iter().enumerate() {
            s_pair[(i, j)] = dense[(gi, gj)];
        }
    }
    let cond_cross = if rest.is_empty() {
        s_pair.view((0, ka), (ka, kb)).into_owned()
    } else {
        let mut s_pr = DMatrix::zeros(ka + kb, rest.len());
        let mut s_rr = DMatrix::zeros(rest.len(), rest.len());
        for (j, &gj) in rest.iter().enumerate() {
            for (i, &gi) in pair.iter().enumerate() {
                s_pr[(i, j)] = dense[(gi, gj)];
            }
            for (i, &gi) in rest.iter().enumerate() {
                s_rr[(i, j)] = dense[(gi, gj)];
            }
        }
        let chol = Cholesky::new(s_rr).ok_or_else(|| Error::NonPositiveDefinite {
            context: "conditioning block in the equivalence check".to_string(),
        })?;
        let bar = &s_pair - &s_pr * chol.solve(&s_pr.transpose());
        bar.view((0, ka), (ka, kb)).into_owned()
    };

    let chol = Cholesky::new(dense.clone()).ok_or_else(|| Error::NonPositiveDefinite {
        context: "covariance in the equivalence check".to_string(),
    })?;
    let omega = chol.inverse();
    let mut omega_ab = DMatrix::zeros(ka, kb);
    for (i, gi) in ra.clone().enumerate() {
        for (j, gj) in rb.clone().enumerate() {
            omega_ab[(i, j)] = omega[(gi, gj)];
        }
    }
    Ok((cond_cross.norm() <= 1e-10, omega_ab.norm() <= 1e-10))
}
