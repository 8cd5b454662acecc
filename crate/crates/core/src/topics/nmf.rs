use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textkit::DocTermMatrix;

/// Replacement for exact zeros in the initial factors.
pub const INIT_EPSILON: f64 = 1e-8;

/// Dense SVD is used below this many matrix entries; larger inputs use
/// randomized subspace iteration.
const DENSE_SVD_LIMIT: usize = 250_000;

/// `(sqrt(n) - L1/L2) / (sqrt(n) - 1)`: 0 for a constant vector, 1 for a
/// vector with a single non-zero.
pub fn hoyer_sparseness(v: &[f64]) -> Result<f64> {
    if v.len() < 2 {
        return Err(Error::InvalidArgument("sparseness needs at least two entries".into()));
    }
    if v.iter().any(|x| *x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidArgument("sparseness needs a finite non-negative vector".into()));
    }
    let l1: f64 = v.iter().sum();
    if l1 == 0.0 {
        return Err(Error::InvalidArgument("sparseness of an all-zero vector".into()));
    }
    let l2 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let rn = (v.len() as f64).sqrt();
    Ok(((rn - l1 / l2) / (rn - 1.0)).clamp(0.0, 1.0))
}

/// Closest non-negative vector to `x` with the same L2 norm and Hoyer
/// sparseness `target` (Hoyer's alternating projection).
pub fn project_sparseness(x: &[f64], target: f64) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 || !(0.0..1.0).contains(&target) {
        return Err(Error::InvalidArgument(format!(
            "cannot project a length-{n} vector to sparseness {target}"
        )));
    }
    let l2 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if l2 == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let rn = (n as f64).sqrt();
    let l1 = l2 * (rn - target * (rn - 1.0));
    let l2sq = l2 * l2;
    let shift = (l1 - x.iter().sum::<f64>()) / n as f64;
    let mut s: Vec<f64> = x.iter().map(|v| v + shift).collect();
    let mut zero = vec![false; n];
    for _ in 0..=n {
        let free = zero.iter().filter(|z| !**z).count() as f64;
        let midpoint: Vec<f64> = zero.iter().map(|&z| if z { 0.0 } else { l1 / free }).collect();
        let diff: Vec<f64> = s.iter().zip(&midpoint).map(|(a, m)| a - m).collect();
        let a: f64 = diff.iter().map(|d| d * d).sum();
        let b: f64 = 2.0 * diff.iter().zip(&midpoint).map(|(d, m)| d * m).sum::<f64>();
        let c: f64 = midpoint.iter().map(|m| m * m).sum::<f64>() - l2sq;
        let alpha = if a > 0.0 { (-b + (b * b - 4.0 * a * c).max(0.0).sqrt()) / (2.0 * a) } else { 0.0 };
        for i in 0..n {
            s[i] = midpoint[i] + alpha * diff[i];
        }
        if s.iter().all(|v| *v >= 0.0) {
            return Ok(s);
        }
        for i in 0..n {
            if s[i] < 0.0 {
                zero[i] = true;
                s[i] = 0.0;
            }
        }
        let free = zero.iter().filter(|z| !**z).count() as f64;
        let excess = (s.iter().sum::<f64>() - l1) / free;
        for i in 0..n {
            if !zero[i] {
                s[i] -= excess;
            }
        }
    }
    Ok(s.into_iter().map(|v| v.max(0.0)).collect())
}

fn sparse_times_dense(x: &DocTermMatrix, d: &DMatrix<f64>) -> DMatrix<f64> {
    // X (n x m) * D (m x l)
    let mut out = DMatrix::zeros(x.n_rows(), d.ncols());
    for (i, row) in x.rows().enumerate() {
        for &(j, v) in row {
            for c in 0..d.ncols() {
                out[(i, c)] += v * d[(j, c)];
            }
        }
    }
    out
}

fn sparse_t_times_dense(x: &DocTermMatrix, d: &DMatrix<f64>) -> DMatrix<f64> {
    // X^T (m x n) * D (n x l)
    let mut out = DMatrix::zeros(x.n_cols(), d.ncols());
    for (i, row) in x.rows().enumerate() {
        for &(j, v) in row {
            for c in 0..d.ncols() {
                out[(j, c)] += v * d[(i, c)];
            }
        }
    }
    out
}

/// Leading `k` singular triplets, largest first: (U n x k, sigma, V m x k).
fn truncated_svd(x: &DocTermMatrix, k: usize, seed: u64) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let (n, m) = (x.n_rows(), x.n_cols());
    let (u, s, v) = if n * m <= DENSE_SVD_LIMIT {
        let svd = x.to_dense().svd(true, true);
        let u = svd.u.ok_or_else(|| Error::InvalidArgument("svd failed".into()))?;
        let vt = svd.v_t.ok_or_else(|| Error::InvalidArgument("svd failed".into()))?;
        (u, svd.singular_values.iter().copied().collect::<Vec<_>>(), vt.transpose())
    } else {
        let l = (k + 10).min(n.min(m));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let omega = DMatrix::from_fn(m, l, |_, _| rng.random_range(-1.0..1.0));
        let mut q = sparse_times_dense(x, &omega).qr().q();
        for _ in 0..4 {
            let z = sparse_t_times_dense(x, &q).qr().q();
            q = sparse_times_dense(x, &z).qr().q();
        }
        let bt = sparse_t_times_dense(x, &q); // (Q^T X)^T, m x l
        let svd = bt.svd(true, true);
        let ub = svd.u.ok_or_else(|| Error::InvalidArgument("svd failed".into()))?;
        let vbt = svd.v_t.ok_or_else(|| Error::InvalidArgument("svd failed".into()))?;
        // B^T = Ub S Vb^T  =>  B = Vb S Ub^T, X ~ Q B = (Q Vb) S Ub^T
        (q * vbt.transpose(), svd.singular_values.iter().copied().collect(), ub)
    };
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    order.truncate(k);
    let uk = DMatrix::from_fn(n, k, |i, c| u[(i, order[c])]);
    let vk = DMatrix::from_fn(m, k, |j, c| v[(j, order[c])]);
    Ok((uk, order.iter().map(|&c| s[c]).collect(), vk))
}

/// Non-negative double SVD initialization: each singular pair is split into
/// positive and negative parts and the part with the larger norm product is
/// kept. Exact zeros become [`INIT_EPSILON`].
pub fn nndsvd_init(x: &DocTermMatrix, k: usize, seed: u64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n, m) = (x.n_rows(), x.n_cols());
    if k == 0 || k > n.min(m) {
        return Err(Error::InvalidArgument(format!(
            "rank {k} is not between 1 and min({n}, {m})"
        )));
    }
    if x.rows().flatten().any(|&(_, v)| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidArgument("matrix must be finite and non-negative".into()));
    }
    let (u, sigma, v) = truncated_svd(x, k, seed)?;
    if sigma[0] <= 0.0 || sigma[k - 1] <= 1e-12 * sigma[0] {
        return Err(Error::InvalidArgument(format!("matrix rank is below {k}")));
    }
    let mut w = DMatrix::zeros(n, k);
    let mut h = DMatrix::zeros(k, m);
    for c in 0..k {
        let uc: Vec<f64> = u.column(c).iter().copied().collect();
        let vc: Vec<f64> = v.column(c).iter().copied().collect();
        let (wu, hv, scale) = if c == 0 {
            (
                uc.iter().map(|a| a.abs()).collect::<Vec<_>>(),
                vc.iter().map(|a| a.abs()).collect::<Vec<_>>(),
                sigma[0].sqrt(),
            )
        } else {
            let pos = |z: &[f64]| z.iter().map(|a| a.max(0.0)).collect::<Vec<_>>();
            let neg = |z: &[f64]| z.iter().map(|a| (-a).max(0.0)).collect::<Vec<_>>();
            let norm = |z: &[f64]| z.iter().map(|a| a * a).sum::<f64>().sqrt();
            let (up, un, vp, vn) = (pos(&uc), neg(&uc), pos(&vc), neg(&vc));
            let mp = norm(&up) * norm(&vp);
            let mn = norm(&un) * norm(&vn);
            let (a, b, mag) = if mp >= mn { (up, vp, mp) } else { (un, vn, mn) };
            if mag == 0.0 {
                (vec![0.0; n], vec![0.0; m], 0.0)
            } else {
                let (na, nb) = (norm(&a), norm(&b));
                (
                    a.iter().map(|z| z / na).collect(),
                    b.iter().map(|z| z / nb).collect(),
                    (sigma[c] * mag).sqrt(),
                )
            }
        };
        for i in 0..n {
            w[(i, c)] = scale * wu[i];
        }
        for j in 0..m {
            h[(c, j)] = scale * hv[j];
        }
    }
    w.iter_mut().filter(|z| **z == 0.0).for_each(|z| *z = INIT_EPSILON);
    h.iter_mut().filter(|z| **z == 0.0).for_each(|z| *z = INIT_EPSILON);
    Ok((w, h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmfOptions {
    pub k: usize,
    /// Minimum Hoyer sparseness of every document's topic weights.
    pub target_sparseness: Option<f64>,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for NmfOptions {
    fn default() -> Self {
        NmfOptions {
            k: 10,
            target_sparseness: Some(0.5),
            max_iters: 500,
            tol: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    /// Documents x topics.
    pub w: DMatrix<f64>,
    /// Topics x terms.
    pub h: DMatrix<f64>,
    /// Squared Frobenius error after initialization and after each
    /// iteration.
    pub objective_trace: Vec<f64>,
    pub n_iters: usize,
    pub converged: bool,
}

/// `||X - W H||_F^2` through `||X||^2 - 2 <X, WH> + <W^T W, H H^T>`.
pub fn objective(x: &DocTermMatrix, x_norm_sq: f64, w: &DMatrix<f64>, h: &DMatrix<f64>) -> f64 {
    let k = w.ncols();
    let mut cross = 0.0;
    for (i, row) in x.rows().enumerate() {
        for &(j, v) in row {
            let mut dot = 0.0;
            for t in 0..k {
                dot += w[(i, t)] * h[(t, j)];
            }
            cross += v * dot;
        }
    }
    let wtw = w.transpose() * w;
    let hht = h * h.transpose();
    let quad = wtw.component_mul(&hht).sum();
    (x_norm_sq - 2.0 * cross + quad).max(0.0)
}

/// One sweep of exact block minimization over the rows of `H`
/// (hierarchical alternating least squares).
fn update_h(x: &DocTermMatrix, w: &DMatrix<f64>, h: &mut DMatrix<f64>) {
    let c = sparse_t_times_dense(x, w).transpose(); // W^T X, k x m
    let d = w.transpose() * w;
    for t in 0..h.nrows() {
        let dtt = d[(t, t)];
        if dtt <= 0.0 {
            continue;
        }
        let dh = d.row(t) * &*h;
        for j in 0..h.ncols() {
            h[(t, j)] = (h[(t, j)] + (c[(t, j)] - dh[j]) / dtt).max(0.0);
        }
    }
}

fn update_w(x: &DocTermMatrix, w: &mut DMatrix<f64>, h: &DMatrix<f64>) {
    let a = sparse_times_dense(x, &h.transpose()); // X H^T, n x k
    let b = h * h.transpose();
    for t in 0..w.ncols() {
        let btt = b[(t, t)];
        if btt <= 0.0 {
            continue;
        }
        let wb = &*w * b.column(t);
        for i in 0..w.nrows() {
            w[(i, t)] = (w[(i, t)] + (a[(i, t)] - wb[i]) / btt).max(0.0);
        }
    }
}

/// Clips negatives and raises each non-zero row to at least `target`
/// sparseness.
fn constrain_rows(w: &mut DMatrix<f64>, target: f64) -> Result<()> {
    for i in 0..w.nrows() {
        let mut row: Vec<f64> = w.row(i).iter().map(|v| v.max(0.0)).collect();
        if row.iter().any(|v| *v > 0.0) && hoyer_sparseness(&row)? < target {
            row = project_sparseness(&row, target)?;
        }
        for (c, v) in row.into_iter().enumerate() {
            w[(i, c)] = v;
        }
    }
    Ok(())
}

fn check_finite(m: &DMatrix<f64>, iteration: usize) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { stage: "nmf", iteration })
    }
}

/// Minimizes `||X - W H||_F^2` over non-negative factors from an NNDSVD
/// start. Without a sparseness target both factors take exact column-wise
/// least-squares updates clipped at zero. With one, W takes
/// projected-gradient steps with backtracking and every row is kept at or
/// above the target, while H keeps the column-wise updates. Stops when the relative objective change falls
/// below `tol`; an update that would raise the objective is discarded and
/// ends the run.
pub fn fit_nmf(x: &DocTermMatrix, opts: &NmfOptions) -> Result<Factorization> {
    if let Some(t) = opts.target_sparseness {
        if !(0.0..1.0).contains(&t) {
            return Err(Error::InvalidArgument(format!("sparseness target {t} outside [0, 1)")));
        }
        if opts.k < 2 {
            return Err(Error::InvalidArgument("a sparseness target needs k >= 2".into()));
        }
    }
    let (mut w, mut h) = nndsvd_init(x, opts.k, opts.seed)?;
    let x_norm_sq = x.frobenius_sq();
    if let Some(t) = opts.target_sparseness {
        constrain_rows(&mut w, t)?;
    }
    let mut f = objective(x, x_norm_sq, &w, &h);
    let mut trace = vec![f];
    let mut step = 1.0 / (x_norm_sq.sqrt().max(1.0));
    let mut converged = false;
    let mut iters = 0;
    while iters < opts.max_iters {
        iters += 1;
        let (w_old, h_old) = (w.clone(), h.clone());
        match opts.target_sparseness {
            None => update_w(x, &mut w, &h),
            Some(t) => {
                let grad = &w * (&h * h.transpose()) - sparse_times_dense(x, &h.transpose());
                loop {
                    let mut trial = &w - &grad * step;
                    constrain_rows(&mut trial, t)?;
                    let ft = objective(x, x_norm_sq, &trial, &h);
                    if ft <= f {
                        w = trial;
                        step *= 1.2;
                        break;
                    }
                    step *= 0.5;
                    if step < 1e-200 {
                        break;
                    }
                }
            }
        }
        check_finite(&w, iters)?;
        update_h(x, &w, &mut h);
        check_finite(&h, iters)?;
        let f_new = objective(x, x_norm_sq, &w, &h);
        if !f_new.is_finite() {
            return Err(Error::NonFinite { stage: "nmf", iteration: iters });
        }
        if f_new > f {
            w = w_old;
            h = h_old;
            converged = true;
            break;
        }
        let rel = (f - f_new) / f.max(f64::MIN_POSITIVE);
        f = f_new;
        trace.push(f);
        if rel < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(Factorization {
        w,
        h,
        objective_trace: trace,
        n_iters: iters,
        converged,
    })
}
