//! Undirected graphs on node indices.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::blockmat::BlockSymMatrix;
use crate::{Error, Result};

/// Simple undirected graph; edges are stored as ordered pairs `(a, b)` with
/// `a < b`, so iteration order is deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    node_count: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn new(node_count: usize) -> Self {
        Self {
            node_count,
            edges: BTreeSet::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<()> {
        if a >= self.node_count || b >= self.node_count {
            return Err(Error::NodeOutOfRange {
                index: a.max(b),
                node_count: self.node_count,
            });
        }
        if a == b {
            return Err(Error::InvalidConfig(alloc::format!(
                "self loop at node {a}"
            )));
        }
        self.edges.insert((a.min(b), a.max(b)));
        Ok(())
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) -> bool {
        self.edges.remove(&(a.min(b), a.max(b)))
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    /// Edges in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == v || b == v)
            .count()
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn max_degree(&self) -> usize {
        (0..self.node_count).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    /// Edge set read off a precision matrix: an edge exists exactly when the
    /// off-diagonal block is not identically zero.
    pub fn from_precision_support(omega: &BlockSymMatrix) -> Self {
        let p = omega.node_count();
        let mut g = Self::new(p);
        for a in 0..p {
            for b in (a + 1)..p {
                if omega.block_norm(a, b).unwrap() > 0.0 {
                    g.edges.insert((a, b));
                }
            }
        }
        g
    }

    /// Connected components, each sorted ascending, ordered by smallest
    /// member.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.node_count).collect();
        fn find(parent: &mut [usize], mut v: usize) -> usize {
            while parent[v] != v {
                parent[v] = parent[parent[v]];
                v = parent[v];
            }
            v
        }
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut comps: alloc::collections::BTreeMap<usize, Vec<usize>> =
            alloc::collections::BTreeMap::new();
        for v in 0..self.node_count {
            let r = find(&mut parent, v);
            comps.entry(r).or_default().push(v);
        }
        comps.into_values().collect()
    }

    /// Number of edges present in exactly one of the two graphs.
    pub fn hamming_distance(&self, other: &Graph) -> Result<usize> {
        if self.node_count != other.node_count {
            return Err(Error::DimensionMismatch {
                expected: self.node_count,
                got: other.node_count,
                context: "graph node counts",
            });
        }
        Ok(self.edges.symmetric_difference(&other.edges).count())
    }
}
