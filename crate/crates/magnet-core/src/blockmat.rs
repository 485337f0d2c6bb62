//! Symmetric matrices viewed through a node-block partition.
//!
//! The estimation problem only ever touches a dense symmetric matrix through
//! its `k_a x k_b` node blocks, so the wrapper here enforces symmetry at
//! construction and offers block-level access plus the block-norm operator
//! `C(M)` (the `p x p` matrix of per-block Frobenius norms) and the induced
//! infinity operator norm used by the recovery-condition diagnostics.

use alloc::format;

use nalgebra::DMatrix;

use crate::layout::AttributeLayout;
use crate::{Error, Result};

/// Largest tolerated entrywise deviation from symmetry at construction.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Dense symmetric matrix partitioned by an [`AttributeLayout`].
///
/// Intended for stacked dimensions up to a few thousand; storage is a single
/// dense matrix, no sparsity is exploited.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSymMatrix {
    layout: AttributeLayout,
    data: DMatrix<f64>,
}

impl BlockSymMatrix {
    /// Wraps a dense matrix, verifying shape and symmetry. Inputs within
    /// [`SYMMETRY_TOL`] of symmetric are symmetrized as `(m + m^T) / 2`;
    /// anything worse is rejected.
    pub fn from_dense(layout: AttributeLayout, mut data: DMatrix<f64>) -> Result<Self> {
        let d = layout.total_dim();
        if data.nrows() != d || data.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: if data.nrows() != d {
                    data.nrows()
                } else {
                    data.ncols()
                },
                context: "block matrix vs layout",
            });
        }
        let mut max_dev = 0.0f64;
        for i in 0..d {
            for j in (i + 1)..d {
                let dev = (data[(i, j)] - data[(j, i)]).abs();
                if dev > max_dev {
                    max_dev = dev;
                }
            }
        }
        if max_dev > SYMMETRY_TOL {
            return Err(Error::Asymmetric { max_dev });
        }
        if max_dev > 0.0 {
            for i in 0..d {
                for j in (i + 1)..d {
                    let avg = 0.5 * (data[(i, j)] + data[(j, i)]);
                    data[(i, j)] = avg;
                    data[(j, i)] = avg;
                }
            }
        }
        Ok(Self { layout, data })
    }

    pub fn zeros(layout: AttributeLayout) -> Self {
        let d = layout.total_dim();
        Self {
            layout,
            data: DMatrix::zeros(d, d),
        }
    }

    pub fn identity(layout: AttributeLayout) -> Self {
        let d = layout.total_dim();
        Self {
            layout,
            data: DMatrix::identity(d, d),
        }
    }

    pub fn layout(&self) -> &AttributeLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dim()
    }

    pub fn node_count(&self) -> usize {
        self.layout.node_count()
    }

    pub fn as_dense(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_dense(self) -> DMatrix<f64> {
        self.data
    }

    /// Owned copy of block `(a, b)` with shape `k_a x k_b`.
    pub fn block(&self, a: usize, b: usize) -> Result<DMatrix<f64>> {
        self.layout.check_node(a)?;
        self.layout.check_node(b)?;
        let (ra, rb) = (self.layout.range(a), self.layout.range(b));
        Ok(self
            .data
            .view((ra.start, rb.start), (ra.len(), rb.len()))
            .into_owned())
    }

    /// Writes block `(a, b)` and mirrors `(b, a) = m^T`. A diagonal block
    /// must itself be symmetric within [`SYMMETRY_TOL`].
    pub fn set_block(&mut self, a: usize, b: usize, m: &DMatrix<f64>) -> Result<()> {
        self.layout.check_node(a)?;
        self.layout.check_node(b)?;
        let (ra, rb) = (self.layout.range(a), self.layout.range(b));
        if m.nrows() != ra.len() {
            return Err(Error::DimensionMismatch {
                expected: ra.len(),
                got: m.nrows(),
                context: "block rows",
            });
        }
        if m.ncols() != rb.len() {
            return Err(Error::DimensionMismatch {
                expected: rb.len(),
                got: m.ncols(),
                context: "block cols",
            });
        }
        if a == b {
            let mut max_dev = 0.0f64;
            for i in 0..m.nrows() {
                for j in (i + 1)..m.ncols() {
                    max_dev = max_dev.max((m[(i, j)] - m[(j, i)]).abs());
                }
            }
            if max_dev > SYMMETRY_TOL {
                return Err(Error::Asymmetric { max_dev });
            }
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                    self.data[(ra.start + i, ra.start + j)] = avg;
                }
            }
        } else {
            self.data
                .view_mut((ra.start, rb.start), (ra.len(), rb.len()))
                .copy_from(m);
            self.data
                .view_mut((rb.start, ra.start), (rb.len(), ra.len()))
                .copy_from(&m.transpose());
        }
        Ok(())
    }

    /// Frobenius norm of block `(a, b)`.
    pub fn block_norm(&self, a: usize, b: usize) -> Result<f64> {
        self.layout.check_node(a)?;
        self.layout.check_node(b)?;
        let (ra, rb) = (self.layout.range(a), self.layout.range(b));
        Ok(self
            .data
            .view((ra.start, rb.start), (ra.len(), rb.len()))
            .norm())
    }

    /// The block-norm operator `C`: entry `(a, b)` is `||M_ab||_F`.
    pub fn c_operator(&self) -> BlockNormMatrix {
        BlockNormMatrix {
            norms: c_operator_dense(&self.layout, &self.data)
                .expect("layout matches by construction"),
        }
    }

    /// Largest Frobenius norm over off-diagonal blocks; zero when `p = 1`.
    pub fn max_offdiag_block_norm(&self) -> f64 {
        let p = self.node_count();
        let mut best = 0.0f64;
        for a in 0..p {
            for b in (a + 1)..p {
                let ra = self.layout.range(a);
                let rb = self.layout.range(b);
                let n = self
                    .data
                    .view((ra.start, rb.start), (ra.len(), rb.len()))
                    .norm();
                if n > best {
                    best = n;
                }
            }
        }
        best
    }

    /// Construction bypass for internal callers that guarantee symmetry.
    pub(crate) fn from_dense_unchecked(layout: AttributeLayout, data: DMatrix<f64>) -> Self {
        debug_assert_eq!(data.nrows(), layout.total_dim());
        debug_assert_eq!(data.ncols(), layout.total_dim());
        Self { layout, data }
    }
}

/// `p x p` matrix of per-block Frobenius norms.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockNormMatrix {
    norms: DMatrix<f64>,
}

impl BlockNormMatrix {
    pub fn node_count(&self) -> usize {
        self.norms.nrows()
    }

    pub fn entry(&self, a: usize, b: usize) -> f64 {
        self.norms[(a, b)]
    }

    pub fn as_dense(&self) -> &DMatrix<f64> {
        &self.norms
    }

    /// Induced infinity operator norm (max absolute row sum).
    pub fn linf_op_norm(&self) -> f64 {
        linf_op_norm(&self.norms)
    }

    /// Largest entry; all entries are nonnegative by construction.
    pub fn max_entry(&self) -> f64 {
        self.norms.iter().copied().fold(0.0, f64::max)
    }
}

/// Block-norm operator for a general (not necessarily symmetric or square)
/// matrix partitioned by `row_layout` rows and `col_layout` columns.
pub fn c_operator_general(
    row_layout: &AttributeLayout,
    col_layout: &AttributeLayout,
    m: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if m.nrows() != row_layout.total_dim() {
        return Err(Error::DimensionMismatch {
            expected: row_layout.total_dim(),
            got: m.nrows(),
            context: "c_operator rows",
        });
    }
    if m.ncols() != col_layout.total_dim() {
        return Err(Error::DimensionMismatch {
            expected: col_layout.total_dim(),
            got: m.ncols(),
            context: "c_operator cols",
        });
    }
    let (p, q) = (row_layout.node_count(), col_layout.node_count());
    let mut norms = DMatrix::zeros(p, q);
    for a in 0..p {
        for b in 0..q {
            let ra = row_layout.range(a);
            let rb = col_layout.range(b);
            norms[(a, b)] = m.view((ra.start, rb.start), (ra.len(), rb.len())).norm();
        }
    }
    Ok(norms)
}

/// Block-norm operator for a square matrix with the same partition on both
/// axes.
pub fn c_operator_dense(layout: &AttributeLayout, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    c_operator_general(layout, layout, m)
}

/// Max absolute row sum of a dense matrix.
pub fn linf_op_norm(m: &DMatrix<f64>) -> f64 {
    let mut best = 0.0f64;
    for i in 0..m.nrows() {
        let mut row = 0.0f64;
        for j in 0..m.ncols() {
            row += m[(i, j)].abs();
        }
        if row > best {
            best = row;
        }
    }
    best
}

/// Splits a stacked vector by node and returns the largest per-node
/// Euclidean norm.
pub fn max_node_vec_norm(layout: &AttributeLayout, v: &nalgebra::DVector<f64>) -> Result<f64> {
    if v.len() != layout.total_dim() {
        return Err(Error::DimensionMismatch {
            expected: layout.total_dim(),
            got: v.len(),
            context: "stacked vector vs layout",
        });
    }
    let mut best = 0.0f64;
    for a in 0..layout.node_count() {
        let r = layout.range(a);
        let n = v.rows(r.start, r.len()).norm();
        if n > best {
            best = n;
        }
    }
    Ok(best)
}

impl core::fmt::Display for BlockNormMatrix {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{:.4}", self.norms)
    }
}
