//! Synthetic ground truths: chain and nearest-neighbor graphs over
//! 20-node components, block precision matrices in four off-diagonal
//! regimes, and the sample-count rule used by the recovery experiments.

use alloc::string::ToString;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

#[allow(unused_imports)]
use num_traits::Float;

use crate::blockmat::BlockSymMatrix;
use crate::graph::Graph;
use crate::layout::AttributeLayout;
use crate::rng::substream;
use crate::{Error, Result};

const COMPONENT_SIZE: usize = 20;

/// Structure of the nonzero off-diagonal blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Every entry of an edge block equals the base constant.
    Full,
    /// Base constant on the block diagonal, zero elsewhere.
    Diagonal,
    /// Zero on the block diagonal, base constant elsewhere.
    ZeroDiagonal,
    /// Entries drawn i.i.d. uniform from [-0.3,-0.1] ∪ [0.1,0.3].
    UniformRandom,
}

/// Which generator produced the graph; fixes the per-edge constant
/// (0.2 for chains, 0.3/k for nearest-neighbor) and the degree bound `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Chain,
    NearestNeighbor,
}

impl GraphKind {
    /// Maximum node degree the generator guarantees.
    pub fn s(self) -> usize {
        match self {
            GraphKind::Chain => 2,
            GraphKind::NearestNeighbor => 4,
        }
    }

    fn base_value(self, k: usize) -> f64 {
        match self {
            GraphKind::Chain => 0.2,
            GraphKind::NearestNeighbor => 0.3 / k as f64,
        }
    }
}

/// A generated graph together with its block precision matrix. The
/// precision has minimum eigenvalue 0.5 (a `rho * I` shift is folded in)
/// and its off-diagonal support matches `graph` exactly.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub graph: Graph,
    pub precision: BlockSymMatrix,
    pub regime: Regime,
    pub kind: GraphKind,
    pub seed: u64,
    /// Diagonal shift that was added to pin the minimum eigenvalue.
    pub rho: f64,
}

impl GroundTruth {
    pub fn layout(&self) -> &AttributeLayout {
        self.precision.layout()
    }
}

fn check_component_count(p: usize, allow_small: bool) -> Result<usize> {
    if p == 0 {
        return Err(Error::InvalidConfig("p must be positive".to_string()));
    }
    if allow_small && p <= COMPONENT_SIZE {
        return Ok(1);
    }
    if !p.is_multiple_of(COMPONENT_SIZE) {
        return Err(Error::InvalidConfig(alloc::format!(
            "p must be a positive multiple of {COMPONENT_SIZE}, got {p}"
        )));
    }
    Ok(p / COMPONENT_SIZE)
}

/// Chain graph: the nodes of each 20-node component are permuted and
/// connected in succession. `p <= 20` builds a single shorter component;
/// larger `p` must be a multiple of 20.
pub fn chain_graph(p: usize, seed: u64) -> Result<Graph> {
    let n_comp = check_component_count(p, true)?;
    let mut rng = substream(seed, 0);
    let mut g = Graph::new(p);
    for c in 0..n_comp {
        let start = c * COMPONENT_SIZE;
        let size = if n_comp == 1 { p } else { COMPONENT_SIZE };
        let mut order: Vec<usize> = (start..start + size).collect();
        order.shuffle(&mut rng);
        for w in order.windows(2) {
            g.add_edge(w[0], w[1])?;
        }
    }
    Ok(g)
}

/// Nearest-neighbor graph: per 20-node component, points drawn uniformly
/// on the unit square, each node joined to its 4 closest neighbors
/// (distance ties broken by node index), then edges removed at random
/// from over-full nodes until the maximum degree is 4. Removal candidates
/// are kept in lexicographic edge order so the draw sequence is a pure
/// function of the seed.
pub fn nearest_neighbor_graph(p: usize, seed: u64) -> Result<Graph> {
    let n_comp = check_component_count(p, false)?;
    let s = GraphKind::NearestNeighbor.s();
    let mut rng = substream(seed, 0);
    let mut g = Graph::new(p);
    for c in 0..n_comp {
        let start = c * COMPONENT_SIZE;
        let pts: Vec<(f64, f64)> = (0..COMPONENT_SIZE)
            .map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)))
            .collect();
        for i in 0..COMPONENT_SIZE {
            let mut others: Vec<usize> = (0..COMPONENT_SIZE).filter(|&j| j != i).collect();
            others.sort_by(|&x, &y| {
                let dx = dist2(pts[i], pts[x]);
                let dy = dist2(pts[i], pts[y]);
                dx.partial_cmp(&dy).unwrap().then(x.cmp(&y))
            });
            for &j in others.iter().take(s) {
                g.add_edge(start + i, start + j)?; // set-backed, duplicates collapse
            }
        }
        loop {
            let mut over: Vec<(usize, usize)> = g
                .edges()
                .filter(|&(a, b)| {
                    let in_comp = a >= start && a < start + COMPONENT_SIZE;
                    in_comp && (g.degree(a) > s || g.degree(b) > s)
                })
                .collect();
            if over.is_empty() {
                break;
            }
            over.sort_unstable();
            let (a, b) = over[rng.gen_range(0..over.len())];
            g.remove_edge(a, b);
        }
    }
    Ok(g)
}

fn dist2(p: (f64, f64), q: (f64, f64)) -> f64 {
    let dx = p.0 - q.0;
    let dy = p.1 - q.1;
    dx * dx + dy * dy
}

fn toeplitz_block(k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k, k, |i, j| {
        0.5f64.powi((i as isize - j as isize).unsigned_abs() as i32)
    })
}

/// Fills the precision blocks for a given support graph and shifts the
/// result by `rho * I` so the minimum eigenvalue is exactly 0.5. Diagonal
/// blocks are Toeplitz `0.5^|i-j|`; edge blocks follow `regime` with the
/// constant fixed by `kind`. The uniform-random regime draws from the
/// seed; the other regimes are deterministic given the graph.
pub fn build_precision(
    graph: &Graph,
    k: usize,
    regime: Regime,
    kind: GraphKind,
    seed: u64,
) -> Result<GroundTruth> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".to_string()));
    }
    if regime == Regime::ZeroDiagonal && k == 1 {
        return Err(Error::InvalidConfig(
            "zero-diagonal regime with k = 1 zeroes every edge block".to_string(),
        ));
    }
    let p = graph.node_count();
    let layout = AttributeLayout::uniform(p, k)?;
    let d = layout.total_dim();
    let mut m = DMatrix::zeros(d, d);
    let diag = toeplitz_block(k);
    for a in 0..p {
        let r = layout.range(a);
        m.view_mut((r.start, r.start), (k, k)).copy_from(&diag);
    }
    let v = kind.base_value(k);
    let mut rng = substream(seed, 1);
    for (a, b) in graph.edges() {
        let block = match regime {
            Regime::Full => DMatrix::from_element(k, k, v),
            Regime::Diagonal => DMatrix::from_diagonal_element(k, k, v),
            Regime::ZeroDiagonal => DMatrix::from_fn(k, k, |i, j| if i == j { 0.0 } else { v }),
            Regime::UniformRandom => DMatrix::from_fn(k, k, |_, _| {
                let mag = rng.gen_range(0.1..0.3f64);
                if rng.gen::<bool>() {
                    mag
                } else {
                    -mag
                }
            }),
        };
        let (ra, rb) = (layout.range(a), layout.range(b));
        m.view_mut((ra.start, rb.start), (k, k)).copy_from(&block);
        m.view_mut((rb.start, ra.start), (k, k))
            .copy_from(&block.transpose());
    }
    let min_ev = m
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let rho = 0.5 - min_ev;
    for i in 0..d {
        m[(i, i)] += rho;
    }
    let precision = BlockSymMatrix::from_dense(layout, m)?;
    Ok(GroundTruth {
        graph: graph.clone(),
        precision,
        regime,
        kind,
        seed,
        rho,
    })
}

/// Chain ground truth in the full regime.
pub fn gen_chain(p: usize, k: usize, seed: u64) -> Result<GroundTruth> {
    generate(GraphKind::Chain, p, k, Regime::Full, seed)
}

/// Nearest-neighbor ground truth in the full regime.
pub fn gen_nearest_neighbor(p: usize, k: usize, seed: u64) -> Result<GroundTruth> {
    generate(GraphKind::NearestNeighbor, p, k, Regime::Full, seed)
}

/// General entry point: graph by `kind`, blocks by `regime`.
pub fn generate(
    kind: GraphKind,
    p: usize,
    k: usize,
    regime: Regime,
    seed: u64,
) -> Result<GroundTruth> {
    let graph = match kind {
        GraphKind::Chain => chain_graph(p, seed)?,
        GraphKind::NearestNeighbor => nearest_neighbor_graph(p, seed)?,
    };
    build_precision(&graph, k, regime, kind, seed)
}

/// Sample count `ceil(theta * s^2 * k^2 * ln(p * k))` for a target scaling
/// parameter `theta`. Nonpositive `theta` (or `p * k = 1`) gives 0, which
/// downstream sampling rejects.
pub fn theta_to_n(theta: f64, s: usize, k: usize, p: usize) -> usize {
    if !(theta > 0.0) {
        return 0;
    }
    let val = theta * (s * s * k * k) as f64 * ((p * k) as f64).ln();
    if val <= 0.0 {
        0
    } else {
        val.ceil() as usize
    }
}
