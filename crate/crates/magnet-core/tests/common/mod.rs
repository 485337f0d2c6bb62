//! Independent oracles for the acceptance suite. Everything here is
//! implemented from scratch on plain dense matrices (no block machinery,
//! different algorithms, different linear algebra entry points) so that
//! library results are checked against independent arithmetic rather than
//! against themselves.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Scalar graphical lasso solved in the covariance ("W") formulation by
/// nested coordinate descent: the classic algorithm where each column of
/// the working covariance is refreshed through a lasso regression on the
/// others. Solves
///
/// `min tr(S om) - log det om + lambda * sum_ij |om_ij|`
///
/// with the diagonal penalized, which pins `W_ii = S_ii + lambda` for the
/// whole run. `kkt` is the worst stationarity violation of the returned
/// pair, so callers can reject a sloppy oracle before trusting it.
pub struct GlassoOracle {
    pub omega: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub kkt: f64,
}

pub fn glasso_scalar(s: &DMatrix<f64>, lambda: f64) -> GlassoOracle {
    let p = s.nrows();
    assert_eq!(p, s.ncols());
    let scale = s.amax().max(lambda);
    let mut w = s.clone();
    for i in 0..p {
        w[(i, i)] += lambda;
    }
    // column j of `betas` holds the lasso coefficients for node j against
    // the rest, indexed by position after deleting j
    let mut betas = DMatrix::<f64>::zeros(p.saturating_sub(1), p);
    let soft = |x: f64, t: f64| {
        if x > t {
            x - t
        } else if x < -t {
            x + t
        } else {
            0.0
        }
    };
    for _sweep in 0..10_000 {
        let mut w_change = 0.0f64;
        for j in 0..p {
            let others: Vec<usize> = (0..p).filter(|&i| i != j).collect();
            let m = others.len();
            let w11 = DMatrix::from_fn(m, m, |r, c| w[(others[r], others[c])]);
            let s12 = DVector::from_fn(m, |r, _| s[(others[r], j)]);
            let mut beta: Vec<f64> = (0..m).map(|r| betas[(r, j)]).collect();
            for _inner in 0..10_000 {
                let mut step = 0.0f64;
                for l in 0..m {
                    let mut r = s12[l];
                    for q in 0..m {
                        if q != l {
                            r -= w11[(l, q)] * beta[q];
                        }
                    }
                    let nb = soft(r, lambda) / w11[(l, l)];
                    step = step.max((nb - beta[l]).abs());
                    beta[l] = nb;
                }
                if step <= 1e-13 * scale {
                    break;
                }
            }
            for (r, &b) in beta.iter().enumerate() {
                betas[(r, j)] = b;
            }
            let w12 = &w11 * DVector::from_column_slice(&beta);
            for (r, &g) in others.iter().enumerate() {
                w_change = w_change.max((w[(g, j)] - w12[r]).abs());
                w[(g, j)] = w12[r];
                w[(j, g)] = w12[r];
            }
        }
        if w_change <= 1e-11 * scale {
            break;
        }
    }

    // back out the precision column by column; exact zeros in beta stay
    // exact zeros in omega
    let mut omega = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        let others: Vec<usize> = (0..p).filter(|&i| i != j).collect();
        let mut quad = 0.0;
        for (r, &g) in others.iter().enumerate() {
            quad += w[(g, j)] * betas[(r, j)];
        }
        let om_jj = 1.0 / (w[(j, j)] - quad);
        omega[(j, j)] = om_jj;
        for (r, &g) in others.iter().enumerate() {
            let b = betas[(r, j)];
            omega[(g, j)] = if b == 0.0 { 0.0 } else { -b * om_jj };
        }
    }

    let mut kkt = 0.0f64;
    for i in 0..p {
        for j in 0..p {
            if i == j {
                kkt = kkt.max((w[(i, i)] - s[(i, i)] - lambda).abs());
            } else if omega[(i, j)] != 0.0 {
                kkt = kkt.max((w[(i, j)] - s[(i, j)] - lambda * omega[(i, j)].signum()).abs());
            } else {
                kkt = kkt.max(((w[(i, j)] - s[(i, j)]).abs() - lambda).max(0.0));
            }
        }
    }
    let id_err = (&w * &omega - DMatrix::identity(p, p)).amax();
    GlassoOracle {
        omega,
        w,
        kkt: kkt.max(id_err),
    }
}

/// Best correlation between linear combinations of two groups under a
/// joint covariance, found by projected gradient ascent with random
/// restarts: no eigenvalue identities, just hill climbing on the
/// normalized objective `u' C_ab v` over the ellipsoids
/// `u' C_aa u = v' C_bb v = 1`.
pub fn cca_max_correlation(c: &DMatrix<f64>, ka: usize, restarts: usize, seed: u64) -> f64 {
    let kb = c.nrows() - ka;
    let caa = c.view((0, 0), (ka, ka)).into_owned();
    let cab = c.view((0, ka), (ka, kb)).into_owned();
    let cbb = c.view((ka, ka), (kb, kb)).into_owned();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let norm_to = |x: &DVector<f64>, q: &DMatrix<f64>| -> Option<DVector<f64>> {
        let nq = (x.transpose() * q * x)[(0, 0)];
        (nq > 0.0).then(|| x / nq.sqrt())
    };
    let mut best = 0.0f64;
    for _ in 0..restarts {
        let du = DVector::from_fn(ka, |_, _| rng.gen::<f64>() - 0.5);
        let dv = DVector::from_fn(kb, |_, _| rng.gen::<f64>() - 0.5);
        let (Some(mut u), Some(mut v)) = (norm_to(&du, &caa), norm_to(&dv, &cbb)) else {
            continue;
        };
        let mut f = (u.transpose() * &cab * &v)[(0, 0)];
        if f < 0.0 {
            v = -v;
            f = -f;
        }
        let mut t = 0.5f64;
        for _ in 0..20_000 {
            let gu = &cab * &v - &caa * &u * f;
            let gv = cab.transpose() * &u - &cbb * &v * f;
            if gu.amax().max(gv.amax()) <= 1e-13 {
                break;
            }
            let mut advanced = false;
            while t >= 1e-16 {
                let (Some(un), Some(vn)) =
                    (norm_to(&(&u + &gu * t), &caa), norm_to(&(&v + &gv * t), &cbb))
                else {
                    t *= 0.5;
                    continue;
                };
                let fnew = (un.transpose() * &cab * &vn)[(0, 0)];
                if fnew > f {
                    u = un;
                    v = vn;
                    f = fnew;
                    t = (t * 2.0).min(4.0);
                    advanced = true;
                    break;
                }
                t *= 0.5;
            }
            if !advanced {
                break;
            }
        }
        best = best.max(f);
    }
    best
}

/// Recovery constants for scalar attributes computed the pedestrian way:
/// flat indices into the `p^2 x p^2` Hessian, LU inversion, entrywise
/// absolute values everywhere a block norm would appear.
pub struct ScalarDiagnostics {
    pub alpha: f64,
    pub kappa_sigma: f64,
    pub kappa_h: f64,
    pub min_signal: f64,
    pub sigma_max_diag: f64,
}

pub fn scalar_diagnostics(omega: &DMatrix<f64>) -> ScalarDiagnostics {
    let p = omega.nrows();
    let sigma = omega.clone().try_inverse().expect("oracle input invertible");
    let mut t_idx = Vec::new();
    let mut n_idx = Vec::new();
    for a in 0..p {
        for b in 0..p {
            if a == b || omega[(a, b)] != 0.0 {
                t_idx.push(a * p + b);
            } else {
                n_idx.push(a * p + b);
            }
        }
    }
    let h = |r: usize, c: usize| sigma[(r / p, c / p)] * sigma[(r % p, c % p)];
    let h_tt = DMatrix::from_fn(t_idx.len(), t_idx.len(), |i, j| h(t_idx[i], t_idx[j]));
    let h_tt_inv = h_tt.try_inverse().expect("support hessian invertible");
    let abs_row_sum_max = |m: &DMatrix<f64>| -> f64 {
        (0..m.nrows())
            .map(|i| m.row(i).iter().map(|x| x.abs()).sum())
            .fold(0.0f64, f64::max)
    };
    let kappa_h = abs_row_sum_max(&h_tt_inv);
    let alpha = if n_idx.is_empty() {
        1.0
    } else {
        let h_nt = DMatrix::from_fn(n_idx.len(), t_idx.len(), |i, j| h(n_idx[i], t_idx[j]));
        1.0 - abs_row_sum_max(&(h_nt * &h_tt_inv))
    };
    let kappa_sigma = abs_row_sum_max(&sigma);
    let mut min_signal = f64::INFINITY;
    for a in 0..p {
        for b in (a + 1)..p {
            if omega[(a, b)] != 0.0 {
                min_signal = min_signal.min(omega[(a, b)].abs());
            }
        }
    }
    let sigma_max_diag = (0..p).map(|i| sigma[(i, i)]).fold(0.0f64, f64::max);
    ScalarDiagnostics {
        alpha,
        kappa_sigma,
        kappa_h,
        min_signal,
        sigma_max_diag,
    }
}

/// Spearman rank correlation with average ranks on ties. A flat series
/// (zero rank variance on either side) counts as "no trend" and scores
/// 0.0, which is the conservative reading when the assertion is
/// "correlation at most zero".
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let rx = ranks(x);
    let ry = ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx).powi(2);
        syy += (ry[i] - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).expect("rankable values"));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Dense random covariance `A A' / d + 0.3 I`, the plainest way to get a
/// well-conditioned positive definite matrix of a given size.
pub fn random_pd(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(d, d, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
    &a * a.transpose() / d as f64 + DMatrix::identity(d, d) * 0.3
}

/// Sparse scalar precision: chain backbone plus `extra` random chords,
/// diagonally dominant by construction so it is always positive definite.
pub fn random_sparse_precision(p: usize, extra: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut om = DMatrix::<f64>::zeros(p, p);
    for a in 0..p.saturating_sub(1) {
        let v = if rng.gen::<bool>() { 0.3 } else { -0.3 };
        om[(a, a + 1)] = v;
        om[(a + 1, a)] = v;
    }
    let mut placed = 0;
    while placed < extra {
        let a = rng.gen_range(0..p);
        let b = rng.gen_range(0..p);
        if a == b || om[(a.min(b), a.max(b))] != 0.0 || b == a + 1 || a == b + 1 {
            continue;
        }
        let v = if rng.gen::<bool>() { 0.2 } else { -0.2 };
        om[(a, b)] = v;
        om[(b, a)] = v;
        placed += 1;
    }
    for i in 0..p {
        let row: f64 = (0..p).filter(|&j| j != i).map(|j| om[(i, j)].abs()).sum();
        om[(i, i)] = row + 0.5;
    }
    om
}
