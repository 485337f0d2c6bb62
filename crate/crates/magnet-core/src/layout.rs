//! Bookkeeping that maps nodes to row/column ranges of the stacked space.

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Attribute counts of the `p` nodes, with precomputed offsets into the
/// stacked dimension `sum(attr_counts)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeLayout {
    attr_counts: Vec<usize>,
    offsets: Vec<usize>,
}

impl AttributeLayout {
    pub fn new(attr_counts: Vec<usize>) -> Result<Self> {
        if attr_counts.is_empty() {
            return Err(Error::InvalidLayout("need at least one node".to_string()));
        }
        if let Some(node) = attr_counts.iter().position(|&k| k == 0) {
            return Err(Error::InvalidLayout(alloc::format!(
                "node {node} has zero attributes"
            )));
        }
        let mut offsets = Vec::with_capacity(attr_counts.len() + 1);
        let mut acc = 0usize;
        offsets.push(0);
        for &k in &attr_counts {
            acc += k;
            offsets.push(acc);
        }
        Ok(Self {
            attr_counts,
            offsets,
        })
    }

    /// `node_count` nodes with the same attribute count `k` each.
    pub fn uniform(node_count: usize, k: usize) -> Result<Self> {
        Self::new(alloc::vec![k; node_count])
    }

    pub fn node_count(&self) -> usize {
        self.attr_counts.len()
    }

    /// Total stacked dimension.
    pub fn total_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn attr_count(&self, node: usize) -> usize {
        self.attr_counts[node]
    }

    pub fn attr_counts(&self) -> &[usize] {
        &self.attr_counts
    }

    /// First stacked index of `node`.
    pub fn offset(&self, node: usize) -> usize {
        self.offsets[node]
    }

    /// Half-open stacked index range of `node`.
    pub fn range(&self, node: usize) -> core::ops::Range<usize> {
        self.offsets[node]..self.offsets[node + 1]
    }

    /// `Some(k)` when every node has exactly `k` attributes.
    pub fn uniform_attr_count(&self) -> Option<usize> {
        let k = self.attr_counts[0];
        self.attr_counts.iter().all(|&c| c == k).then_some(k)
    }

    pub fn check_node(&self, node: usize) -> Result<()> {
        if node < self.node_count() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                index: node,
                node_count: self.node_count(),
            })
        }
    }

    /// Layout of the sub-problem on `nodes` (order preserved, indices must be
    /// in range and distinct).
    pub fn restrict(&self, nodes: &[usize]) -> Result<Self> {
        let mut counts = Vec::with_capacity(nodes.len());
        for &v in nodes {
            self.check_node(v)?;
            counts.push(self.attr_counts[v]);
        }
        Self::new(counts)
    }
}
