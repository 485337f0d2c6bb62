//! Datasets and covariance estimation, including the pairwise
//! available-case estimator for partially observed samples.

use alloc::format;
use alloc::string::ToString;

use nalgebra::{Cholesky, DMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

#[allow(unused_imports)]
use num_traits::Float;

use crate::blockmat::BlockSymMatrix;
use crate::layout::AttributeLayout;
use crate::rng::substream;
use crate::{Error, Result};

/// `n` stacked observations (rows) over `layout.total_dim()` columns, with
/// an optional observation mask (`true` = observed). Masked entries of
/// `values` are ignored by every consumer.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    layout: AttributeLayout,
    values: DMatrix<f64>,
    mask: Option<DMatrix<bool>>,
}

/// Covariance estimate together with the effective pairwise sample counts.
///
/// `n_eff[(a, b)]` is the smallest number of co-observed samples over the
/// attribute pairs of nodes `a` and `b`; with fully observed data it equals
/// `n` everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct CovEstimate {
    pub s: BlockSymMatrix,
    pub n_eff: DMatrix<usize>,
    pub n: usize,
}

impl Dataset {
    pub fn new(layout: AttributeLayout, values: DMatrix<f64>) -> Result<Self> {
        if values.ncols() != layout.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.total_dim(),
                got: values.ncols(),
                context: "dataset columns vs layout",
            });
        }
        Ok(Self {
            layout,
            values,
            mask: None,
        })
    }

    pub fn with_mask(
        layout: AttributeLayout,
        values: DMatrix<f64>,
        mask: DMatrix<bool>,
    ) -> Result<Self> {
        if mask.nrows() != values.nrows() || mask.ncols() != values.ncols() {
            return Err(Error::DimensionMismatch {
                expected: values.nrows() * values.ncols(),
                got: mask.nrows() * mask.ncols(),
                context: "mask shape vs values",
            });
        }
        let mut d = Self::new(layout, values)?;
        // A mask of all-true is the same dataset as no mask; keep it to
        // preserve the caller's intent in round trips.
        d.mask = Some(mask);
        Ok(d)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn layout(&self) -> &AttributeLayout {
        &self.layout
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn mask(&self) -> Option<&DMatrix<bool>> {
        self.mask.as_ref()
    }

    pub fn is_fully_observed(&self) -> bool {
        match &self.mask {
            None => true,
            Some(m) => m.iter().all(|&o| o),
        }
    }

    /// Rows `indices` as a new dataset (mask rows carried along).
    pub fn subsample(&self, indices: &[usize]) -> Result<Self> {
        let d = self.values.ncols();
        let mut vals = DMatrix::zeros(indices.len(), d);
        for (ri, &i) in indices.iter().enumerate() {
            if i >= self.n() {
                return Err(Error::InvalidConfig(format!(
                    "subsample row {i} out of range for n = {}",
                    self.n()
                )));
            }
            vals.row_mut(ri).copy_from(&self.values.row(i));
        }
        let mask = self.mask.as_ref().map(|m| {
            let mut rows = DMatrix::from_element(indices.len(), d, true);
            for (ri, &i) in indices.iter().enumerate() {
                rows.row_mut(ri).copy_from(&m.row(i));
            }
            rows
        });
        Ok(Self {
            layout: self.layout.clone(),
            values: vals,
            mask,
        })
    }

    /// Second-moment covariance `S = X^T X / n`, subtracting column means
    /// first when `center` is set. Requires fully observed data; use
    /// [`Dataset::masked_covariance`] otherwise.
    pub fn sample_covariance(&self, center: bool) -> Result<CovEstimate> {
        if self.n() == 0 {
            return Err(Error::EmptyDataset);
        }
        if !self.is_fully_observed() {
            return Err(Error::InvalidConfig(
                "dataset has missing entries; use masked_covariance".to_string(),
            ));
        }
        let n = self.n();
        let d = self.values.ncols();
        let x = if center {
            let mut c = self.values.clone();
            for j in 0..d {
                let mean = c.column(j).sum() / n as f64;
                for i in 0..n {
                    c[(i, j)] -= mean;
                }
            }
            c
        } else {
            self.values.clone()
        };
        // Upper triangle computed once and mirrored so the result is exactly
        // symmetric.
        let mut s = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let v = x.column(i).dot(&x.column(j)) / n as f64;
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        let p = self.layout.node_count();
        Ok(CovEstimate {
            s: BlockSymMatrix::from_dense_unchecked(self.layout.clone(), s),
            n_eff: DMatrix::from_element(p, p, n),
            n,
        })
    }

    /// Available-case covariance for partially observed data: entry `(l, k)`
    /// averages `x_il * x_ik` over the samples where both columns are
    /// observed. No centering and no positive-semidefinite correction is
    /// applied; the estimate may be indefinite, which the solver tolerates
    /// as long as the diagonal blocks stay positive definite.
    pub fn masked_covariance(&self) -> Result<CovEstimate> {
        if self.n() == 0 {
            return Err(Error::EmptyDataset);
        }
        let n = self.n();
        let d = self.values.ncols();
        let full = DMatrix::from_element(n, d, true);
        let mask = self.mask.as_ref().unwrap_or(&full);
        let mut s = DMatrix::zeros(d, d);
        let mut counts = DMatrix::zeros(d, d);
        for l in 0..d {
            for k in l..d {
                let mut acc = 0.0f64;
                let mut cnt = 0usize;
                for i in 0..n {
                    if mask[(i, l)] && mask[(i, k)] {
                        acc += self.values[(i, l)] * self.values[(i, k)];
                        cnt += 1;
                    }
                }
                if cnt == 0 {
                    return Err(Error::MissingCoObservation { col_a: l, col_b: k });
                }
                let v = acc / cnt as f64;
                s[(l, k)] = v;
                s[(k, l)] = v;
                counts[(l, k)] = cnt;
                counts[(k, l)] = cnt;
            }
        }
        let p = self.layout.node_count();
        let mut n_eff = DMatrix::zeros(p, p);
        for a in 0..p {
            for b in 0..p {
                let (ra, rb) = (self.layout.range(a), self.layout.range(b));
                let mut m = usize::MAX;
                for l in ra.clone() {
                    for k in rb.clone() {
                        m = m.min(counts[(l, k)]);
                    }
                }
                n_eff[(a, b)] = m;
            }
        }
        Ok(CovEstimate {
            s: BlockSymMatrix::from_dense_unchecked(self.layout.clone(), s),
            n_eff,
            n,
        })
    }
}

/// Draws `n` zero-mean Gaussian samples with covariance `precision^{-1}`.
///
/// Sample `i` consumes substream `i` of `seed` (see [`crate::rng`]), so the
/// result is reproducible and individual samples are independent of `n`.
pub fn sample_mvn(precision: &BlockSymMatrix, n: usize, seed: u64) -> Result<Dataset> {
    let d = precision.dim();
    let chol = Cholesky::new(precision.as_dense().clone()).ok_or_else(|| {
        Error::NonPositiveDefinite {
            context: "precision matrix passed to sample_mvn".to_string(),
        }
    })?;
    // x = L^{-T} z has covariance (L L^T)^{-1}.
    let lt = chol.l().transpose();
    let mut values = DMatrix::zeros(n, d);
    let mut z = nalgebra::DVector::zeros(d);
    for i in 0..n {
        let mut rng = substream(seed, i as u64);
        for j in 0..d {
            z[j] = rng.sample(StandardNormal);
        }
        let x = lt
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::NonPositiveDefinite {
                context: "singular Cholesky factor in sample_mvn".to_string(),
            })?;
        values.row_mut(i).copy_from(&x.transpose());
    }
    Dataset::new(precision.layout().clone(), values)
}
