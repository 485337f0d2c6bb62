//! Small-instance recovery diagnostics: the log-det Hessian, block-norm
//! compression operator, irrepresentability margin, and the penalty /
//! sample-size bounds that certify exact support recovery.
//!
//! Everything here materializes the `(pk)^2 x (pk)^2` Hessian, so inputs
//! are capped at `pk <= 60`; these are diagnostics, not production paths.

use alloc::string::ToString;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix};

#[allow(unused_imports)]
use num_traits::Float;

use crate::blockmat::BlockSymMatrix;
use crate::graph::Graph;
use crate::{Error, Result};

const MAX_TOTAL_DIM: usize = 60;

/// Constants governing exact recovery for one precision matrix, all
/// derived from its inverse covariance and support set.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryDiagnostics {
    /// Irrepresentability margin `1 - max row sum of C(H_NT H_TT^{-1})`;
    /// nonpositive means the sufficient conditions are silent.
    pub alpha_irrep: f64,
    /// Max row sum of the block-Frobenius compression of the covariance.
    pub kappa_sigma: f64,
    /// Max row sum of the compression of the inverted support Hessian.
    pub kappa_h: f64,
    /// Smallest off-diagonal edge block norm; infinite for an empty graph.
    pub min_signal: f64,
    /// Largest scalar diagonal entry of the covariance.
    pub sigma_max_diag: f64,
    pub p: usize,
    pub k: usize,
    /// Maximum node degree of the support graph.
    pub s: usize,
}

impl TheoryDiagnostics {
    /// The sufficient conditions only apply with a positive margin.
    pub fn guarantees_recovery(&self) -> bool {
        self.alpha_irrep > 0.0
    }
}

/// Hessian of `tr(S A) - log|A|` at `omega`: the Kronecker square of the
/// inverse. Entry `(i1 * pk + i2, j1 * pk + j2)` equals
/// `sigma[i1, j1] * sigma[i2, j2]`, which makes the `(a, b)` node-pair
/// block of the result `sigma_ac (x) sigma_bd` with row-major local
/// addressing; the compression and gather routines below rely on that
/// layout.
pub fn hessian(omega: &BlockSymMatrix) -> Result<DMatrix<f64>> {
    let d = omega.layout().total_dim();
    if d > MAX_TOTAL_DIM {
        return Err(Error::SizeGuard {
            dim: d,
            max: MAX_TOTAL_DIM,
            context: "hessian is (pk)^2 x (pk)^2",
        });
    }
    let sigma = Cholesky::new(omega.as_dense().clone())
        .ok_or_else(|| Error::NonPositiveDefinite {
            context: "precision matrix for the hessian".to_string(),
        })?
        .inverse();
    Ok(sigma.kronecker(&sigma))
}

/// Global Hessian row/column indices of one node pair, outer index first.
fn pair_indices(pk: usize, ra: core::ops::Range<usize>, rb: core::ops::Range<usize>) -> Vec<usize> {
    let mut out = Vec::with_capacity(ra.len() * rb.len());
    for u in ra {
        for v in rb.clone() {
            out.push(u * pk + v);
        }
    }
    out
}

fn gather(h: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| h[(rows[i], cols[j])])
}

/// Block-Frobenius compression: collapses each `k^2 x k^2` block of a
/// pair-indexed matrix to its Frobenius norm.
fn compress(m: &DMatrix<f64>, k2: usize) -> DMatrix<f64> {
    let nr = m.nrows() / k2;
    let nc = m.ncols() / k2;
    DMatrix::from_fn(nr, nc, |i, j| m.view((i * k2, j * k2), (k2, k2)).norm())
}

fn max_row_sum(m: &DMatrix<f64>) -> f64 {
    let mut best = 0.0f64;
    for i in 0..m.nrows() {
        let s: f64 = m.row(i).iter().map(|x| x.abs()).sum();
        best = best.max(s);
    }
    best
}

/// Computes every recovery constant for a uniform-attribute precision
/// matrix. The support set contains all ordered node pairs with a nonzero
/// block plus every diagonal pair, in lexicographic order; its complement
/// indexes the rows of the cross-Hessian term.
pub fn irrepresentability(omega: &BlockSymMatrix) -> Result<TheoryDiagnostics> {
    let layout = omega.layout();
    let k = layout.uniform_attr_count().ok_or_else(|| {
        Error::InvalidConfig("recovery diagnostics need a uniform attribute count".to_string())
    })?;
    let p = layout.node_count();
    let pk = layout.total_dim();
    let h = hessian(omega)?;
    let sigma = Cholesky::new(omega.as_dense().clone())
        .expect("pd checked by hessian")
        .inverse();

    let support = Graph::from_precision_support(omega);
    let mut t_pairs = Vec::new();
    let mut n_pairs = Vec::new();
    for a in 0..p {
        for b in 0..p {
            if a == b || support.has_edge(a, b) {
                t_pairs.push((a, b));
            } else {
                n_pairs.push((a, b));
            }
        }
    }
    let indices = |pairs: &[(usize, usize)]| -> Vec<usize> {
        pairs
            .iter()
            .flat_map(|&(a, b)| pair_indices(pk, layout.range(a), layout.range(b)))
            .collect()
    };
    let t_idx = indices(&t_pairs);
    let k2 = k * k;

    let h_tt = gather(&h, &t_idx, &t_idx);
    let h_tt_inv = Cholesky::new(h_tt)
        .ok_or_else(|| Error::NonPositiveDefinite {
            context: "support submatrix of the hessian".to_string(),
        })?
        .inverse();
    let kappa_h = max_row_sum(&compress(&h_tt_inv, k2));

    let alpha_irrep = if n_pairs.is_empty() {
        1.0
    } else {
        let n_idx = indices(&n_pairs);
        let cross = gather(&h, &n_idx, &t_idx) * &h_tt_inv;
        1.0 - max_row_sum(&compress(&cross, k2))
    };

    let mut sigma_blocks = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in 0..p {
            let (ra, rb) = (layout.range(a), layout.range(b));
            sigma_blocks[(a, b)] = sigma.view((ra.start, rb.start), (ra.len(), rb.len())).norm();
        }
    }
    let kappa_sigma = max_row_sum(&sigma_blocks);

    let min_signal = support
        .edges()
        .map(|(a, b)| omega.block_norm(a, b).expect("edge indices in range"))
        .fold(f64::INFINITY, f64::min);
    let sigma_max_diag = (0..pk).map(|i| sigma[(i, i)]).fold(0.0f64, f64::max);

    Ok(TheoryDiagnostics {
        alpha_irrep,
        kappa_sigma,
        kappa_h,
        min_signal,
        sigma_max_diag,
        p,
        k,
        s: support.max_degree(),
    })
}

fn check_domain(tau: f64, alpha: f64, gamma: f64) -> Result<()> {
    if !(tau > 2.0) {
        return Err(Error::InvalidConfig("tau must exceed 2".to_string()));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidConfig(
            "alpha must lie in (0, 1]; a nonpositive margin carries no recovery guarantee"
                .to_string(),
        ));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidConfig("gamma must be a finite nonnegative value".to_string()));
    }
    Ok(())
}

/// Penalty level under which recovery is certified:
/// `8 k / alpha * sqrt(128 (1+4 gamma^2)^2 sigma_max^2 (2 ln(2k) + tau ln p) / n)`.
pub fn prop1_lambda(
    sigma_max_diag: f64,
    gamma: f64,
    k: usize,
    p: usize,
    n: usize,
    tau: f64,
    alpha: f64,
) -> Result<f64> {
    check_domain(tau, alpha, gamma)?;
    if n == 0 || k == 0 || p == 0 {
        return Err(Error::InvalidConfig("n, k, p must be positive".to_string()));
    }
    if !(sigma_max_diag > 0.0) {
        return Err(Error::InvalidConfig(
            "sigma_max_diag must be positive".to_string(),
        ));
    }
    let g = 1.0 + 4.0 * gamma * gamma;
    let inner = 128.0 * g * g * sigma_max_diag * sigma_max_diag / n as f64
        * (2.0 * (2.0 * k as f64).ln() + tau * (p as f64).ln());
    Ok(8.0 * k as f64 / alpha * inner.sqrt())
}

/// Sample-size threshold above which the certified penalty recovers the
/// support: `C1 s^2 k^2 (1 + 8/alpha)^2 (tau ln p + ln 4 + 2 ln k)` with
/// `C1 = (48 sqrt(2) (1+4 gamma^2) sigma_max max(ks kh, ks^3 kh^2))^2`.
pub fn prop1_sample_bound(
    diag: &TheoryDiagnostics,
    s: usize,
    k: usize,
    p: usize,
    tau: f64,
    gamma: f64,
    sigma_max: f64,
) -> Result<f64> {
    check_domain(tau, diag.alpha_irrep, gamma)?;
    if k == 0 || p == 0 {
        return Err(Error::InvalidConfig("k, p must be positive".to_string()));
    }
    if !(sigma_max > 0.0) {
        return Err(Error::InvalidConfig("sigma_max must be positive".to_string()));
    }
    let g = 1.0 + 4.0 * gamma * gamma;
    let kappa_term = (diag.kappa_sigma * diag.kappa_h)
        .max(diag.kappa_sigma.powi(3) * diag.kappa_h * diag.kappa_h);
    let c1 = 48.0 * 2.0f64.sqrt() * g * sigma_max * kappa_term;
    let c1 = c1 * c1;
    Ok(c1
        * (s * s * k * k) as f64
        * (1.0 + 8.0 / diag.alpha_irrep).powi(2)
        * (tau * (p as f64).ln() + 4.0f64.ln() + 2.0 * (k as f64).ln()))
}
