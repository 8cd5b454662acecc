//! L1-penalized logistic regression by proximal Newton iterations with a
//! coordinate-descent inner solver, likelihood-ratio tests and
//! cross-validated penalty selection.
//!
//! Fitting works on internally centered and scaled columns so that the
//! penalty treats features on different scales alike; reported coefficients
//! are on the original scale. The penalized objective maximized is
//!
//! `sum_i [y_i log p_i + (1 - y_i) log(1 - p_i)] - lambda * sum_j |beta_j * sd_j|`
//!
//! with the intercept unpenalized.

mod cv;
mod design;

pub use cv::{cv_folds, select_lambda, CvOptions, FoldObserver, LambdaPath};
pub use design::Design;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::chi_square_sf;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub lambda: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            lambda: 0.0,
            max_iters: 10_000,
            tol: 1e-8,
        }
    }
}

impl FitOptions {
    pub fn with_lambda(lambda: f64) -> Self {
        FitOptions {
            lambda,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub feature_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub converged: bool,
    pub n_iters: usize,
    pub log_likelihood: f64,
    /// Penalized objective after each full sweep.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objective_trace: Vec<f64>,
}

impl FittedModel {
    pub fn linear_predictor(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.coefficients.len() {
            return Err(Error::Dimension(format!(
                "row has {} values, model has {} coefficients",
                x.len(),
                self.coefficients.len()
            )));
        }
        Ok(self.intercept + x.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum::<f64>())
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.linear_predictor(x)?))
    }

    /// Probability for a named feature vector; the names must match the
    /// model's features in order.
    pub fn predict_probability(&self, names: &[&str], values: &[f64]) -> Result<f64> {
        if names.len() != self.feature_names.len()
            || names.iter().zip(&self.feature_names).any(|(a, b)| *a != b.as_str())
        {
            return Err(Error::Schema(format!(
                "features {:?} do not match model features {:?}",
                names, self.feature_names
            )));
        }
        self.predict_row(values)
    }

    pub fn predict(&self, design: &Design) -> Result<Vec<f64>> {
        Ok(design.linear_predictor(&self.coefficients, self.intercept)?.into_iter().map(sigmoid).collect())
    }

    pub fn n_nonzero(&self) -> usize {
        self.coefficients.iter().filter(|b| **b != 0.0).count()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn log1pexp(z: f64) -> f64 {
    if z > 35.0 {
        z
    } else if z < -35.0 {
        z.exp()
    } else {
        z.exp().ln_1p()
    }
}

fn row_ll(y: bool, eta: f64) -> f64 {
    (if y { eta } else { 0.0 }) - log1pexp(eta)
}

/// Bernoulli log-likelihood of labels under linear predictors.
pub fn log_likelihood_from_eta(eta: &[f64], y: &[bool]) -> f64 {
    eta.iter().zip(y).map(|(&e, &yi)| row_ll(yi, e)).sum()
}

pub fn log_likelihood(model: &FittedModel, design: &Design, y: &[bool]) -> Result<f64> {
    if design.n_rows() != y.len() {
        return Err(Error::Dimension(format!("{} rows vs {} labels", design.n_rows(), y.len())));
    }
    Ok(log_likelihood_from_eta(&design.linear_predictor(&model.coefficients, model.intercept)?, y))
}

/// Floor on the working weights `p (1 - p)` of the quadratic model.
const MIN_WEIGHT: f64 = 1e-5;

/// Widest unpenalized problem whose Newton step is solved densely.
const DIRECT_SOLVE_MAX_COLS: usize = 64;

/// Warm-startable proximal Newton state for one design and label vector.
/// Coefficients `b` act on the centered, scaled columns.
pub(crate) struct Solver<'a> {
    design: &'a Design,
    y: &'a [bool],
    mean: Vec<f64>,
    scale: Vec<f64>,
    b: Vec<f64>,
    b0: f64,
    eta: Vec<f64>,
}

/// Per-column sums of a weighted least-squares subproblem.
struct Quadratic {
    /// `sum_i w_i` over all rows.
    w_total: f64,
    /// `sum_i w_i x_ij` over the stored entries of each column.
    wx: Vec<f64>,
    /// Curvature of each centered, scaled column.
    h: Vec<f64>,
}

impl<'a> Solver<'a> {
    pub(crate) fn new(design: &'a Design, y: &'a [bool]) -> Result<Self> {
        let n = design.n_rows();
        if n != y.len() {
            return Err(Error::Dimension(format!("{n} rows vs {} labels", y.len())));
        }
        let n_pos = y.iter().filter(|v| **v).count();
        if n_pos == 0 || n_pos == n {
            return Err(Error::SingleClass);
        }
        let mut mean = Vec::with_capacity(design.n_cols());
        let mut scale = Vec::with_capacity(design.n_cols());
        for j in 0..design.n_cols() {
            let (_, val) = design.column(j);
            if val.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "column `{}` has non-finite values",
                    design.names()[j]
                )));
            }
            let m = val.iter().sum::<f64>() / n as f64;
            let var = val.iter().map(|v| v * v).sum::<f64>() / n as f64 - m * m;
            mean.push(m);
            scale.push(if var > 1e-14 * (1.0 + m * m) { var.sqrt() } else { 0.0 });
        }
        let rate = n_pos as f64 / n as f64;
        let b0 = (rate / (1.0 - rate)).ln();
        Ok(Solver {
            design,
            y,
            mean,
            scale,
            b: vec![0.0; design.n_cols()],
            b0,
            eta: vec![b0; n],
        })
    }

    fn objective_at(&self, eta: &[f64], b: &[f64], lambda: f64) -> f64 {
        log_likelihood_from_eta(eta, self.y) - lambda * b.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Smallest penalty at which every coefficient is zero, given an
    /// intercept-only fit.
    pub(crate) fn lambda_max(&self) -> f64 {
        let n = self.y.len() as f64;
        let rate = self.y.iter().filter(|v| **v).count() as f64 / n;
        (0..self.design.n_cols())
            .filter(|&j| self.scale[j] > 0.0)
            .map(|j| {
                let (idx, val) = self.design.column(j);
                let s: f64 = idx
                    .iter()
                    .zip(val)
                    .map(|(&i, &x)| x * (f64::from(u8::from(self.y[i as usize])) - rate))
                    .sum();
                (s / self.scale[j]).abs()
            })
            .fold(0.0, f64::max)
    }

    fn linear_predictor(&self, b0: f64, b: &[f64]) -> Vec<f64> {
        let offset = b0
            - b.iter()
                .zip(&self.mean)
                .zip(&self.scale)
                .filter(|((bj, _), _)| **bj != 0.0)
                .map(|((bj, m), s)| bj * m / s)
                .sum::<f64>();
        let mut eta = vec![offset; self.y.len()];
        for (j, &bj) in b.iter().enumerate().filter(|(_, bj)| **bj != 0.0) {
            let (idx, val) = self.design.column(j);
            let s = self.scale[j];
            for (&i, &x) in idx.iter().zip(val) {
                eta[i as usize] += bj * x / s;
            }
        }
        eta
    }

    fn quadratic(&self, w: &[f64], coords: &[usize]) -> Quadratic {
        let w_total: f64 = w.iter().sum();
        let mut wx = vec![0.0; self.design.n_cols()];
        let mut h = vec![0.0; self.design.n_cols()];
        for &j in coords {
            let (idx, val) = self.design.column(j);
            let (mut sx, mut sxx) = (0.0, 0.0);
            for (&i, &x) in idx.iter().zip(val) {
                let wi = w[i as usize];
                sx += wi * x;
                sxx += wi * x * x;
            }
            let (m, s) = (self.mean[j], self.scale[j]);
            wx[j] = sx;
            h[j] = (sxx - 2.0 * m * sx + m * m * w_total) / (s * s);
        }
        Quadratic { w_total, wx, h }
    }

    /// Minimizer of the penalized quadratic model of the negative
    /// log-likelihood around the current state, by cyclic coordinate
    /// descent. Residuals are kept as sparse parts plus a shared offset so
    /// that each coordinate costs only its stored entries. Returns the
    /// proposal and the number of sweeps used.
    fn newton_proposal(&self, coords: &[usize], lambda: f64, tol: f64, budget: usize) -> (f64, Vec<f64>, usize) {
        let n = self.y.len();
        let mut w = vec![0.0; n];
        let mut r = vec![0.0; n];
        for i in 0..n {
            let p = sigmoid(self.eta[i]);
            w[i] = (p * (1.0 - p)).max(MIN_WEIGHT);
            r[i] = (f64::from(u8::from(self.y[i])) - p) / w[i];
        }
        if lambda == 0.0 && coords.len() <= DIRECT_SOLVE_MAX_COLS {
            if let Some((b0, b)) = self.direct_newton(coords, &w, &r) {
                return (b0, b, 1);
            }
        }
        let q = self.quadratic(&w, coords);
        let mut wr: f64 = w.iter().zip(&r).map(|(a, b)| a * b).sum();
        let mut offset = 0.0;
        let mut b = self.b.clone();
        let mut b0 = self.b0;

        let mut sweep = |set: &[usize], b: &mut Vec<f64>, b0: &mut f64| -> f64 {
            let d0 = (wr + offset * q.w_total) / q.w_total;
            *b0 += d0;
            offset -= d0;
            let mut max_change = d0.abs();
            for &j in set {
                let h = q.h[j];
                if h.is_nan() || h <= 1e-300 {
                    continue;
                }
                let (idx, val) = self.design.column(j);
                let (m, s) = (self.mean[j], self.scale[j]);
                let wrx: f64 = idx.iter().zip(val).map(|(&i, &x)| w[i as usize] * r[i as usize] * x).sum();
                let g = (wrx + offset * q.wx[j] - m * (wr + offset * q.w_total)) / s;
                let z = h * b[j] + g;
                let proposed = z.signum() * (z.abs() - lambda).max(0.0) / h;
                let d = proposed - b[j];
                if d == 0.0 {
                    continue;
                }
                b[j] = proposed;
                for (&i, &x) in idx.iter().zip(val) {
                    r[i as usize] -= d * x / s;
                }
                wr -= d * q.wx[j] / s;
                offset += d * m / s;
                max_change = max_change.max(d.abs());
            }
            max_change
        };

        let mut sweeps = 0;
        while sweeps < budget {
            sweeps += 1;
            if sweep(coords, &mut b, &mut b0) < tol {
                break;
            }
            let active: Vec<usize> = coords.iter().copied().filter(|&j| b[j] != 0.0).collect();
            while sweeps < budget {
                sweeps += 1;
                if sweep(&active, &mut b, &mut b0) < tol {
                    break;
                }
            }
        }
        (b0, b, sweeps)
    }

    /// Exact Newton step of the unpenalized problem from dense weighted
    /// normal equations; `None` when they are singular.
    fn direct_newton(&self, coords: &[usize], w: &[f64], r: &[f64]) -> Option<(f64, Vec<f64>)> {
        let n = self.y.len();
        let k = coords.len() + 1;
        let mut x = DMatrix::<f64>::zeros(n, k);
        x.column_mut(0).fill(1.0);
        for (c, &j) in coords.iter().enumerate() {
            let (m, s) = (self.mean[j], self.scale[j]);
            let mut col = x.column_mut(c + 1);
            col.fill(-m / s);
            let (idx, val) = self.design.column(j);
            for (&i, &v) in idx.iter().zip(val) {
                col[i as usize] += v / s;
            }
        }
        let mut xw = x.clone();
        for (i, wi) in w.iter().enumerate() {
            xw.row_mut(i).scale_mut(*wi);
        }
        let z = DVector::from_iterator(n, (0..n).map(|i| self.eta[i] + r[i]));
        let theta = (xw.transpose() * &x).lu().solve(&(xw.transpose() * z))?;
        if theta.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let mut b = self.b.clone();
        for (c, &j) in coords.iter().enumerate() {
            b[j] = theta[c + 1];
        }
        Some((theta[0], b))
    }

    /// Runs proximal Newton iterations to convergence at `lambda`, starting
    /// from the current state. Each proposal is accepted with backtracking
    /// so the penalized objective never decreases; `max_iters` bounds the
    /// total number of coordinate sweeps.
    pub(crate) fn run(&mut self, opts: &FitOptions) -> Result<FittedModel> {
        if !(opts.lambda.is_finite() && opts.lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {}", opts.lambda)));
        }
        let coords: Vec<usize> = (0..self.design.n_cols()).filter(|&j| self.scale[j] > 0.0).collect();
        let mut trace = Vec::new();
        let mut converged = false;
        let mut iters = 0;
        let mut current = self.objective_at(&self.eta, &self.b, opts.lambda);
        while iters < opts.max_iters {
            let (nb0, nb, sweeps) =
                self.newton_proposal(&coords, opts.lambda, opts.tol * 0.1, opts.max_iters - iters);
            iters += sweeps;
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..50 {
                let b0 = self.b0 + t * (nb0 - self.b0);
                let b: Vec<f64> = self.b.iter().zip(&nb).map(|(o, n)| o + t * (n - o)).collect();
                let eta = self.linear_predictor(b0, &b);
                let obj = self.objective_at(&eta, &b, opts.lambda);
                if !obj.is_finite() {
                    return Err(Error::NonFinite { stage: "glm fit", iteration: iters });
                }
                if obj >= current - 1e-12 * (1.0 + current.abs()) {
                    accepted = Some((b0, b, eta, obj));
                    break;
                }
                t *= 0.5;
            }
            let Some((b0, b, eta, obj)) = accepted else {
                converged = true;
                break;
            };
            let step = b
                .iter()
                .zip(&self.b)
                .map(|(n, o)| (n - o).abs())
                .fold((b0 - self.b0).abs(), f64::max);
            self.b0 = b0;
            self.b = b;
            self.eta = eta;
            current = obj;
            trace.push(obj);
            if step < opts.tol {
                converged = true;
                break;
            }
        }
        Ok(self.model(opts.lambda, converged, iters, trace))
    }

    fn model(&self, lambda: f64, converged: bool, n_iters: usize, trace: Vec<f64>) -> FittedModel {
        let coefficients: Vec<f64> = self
            .b
            .iter()
            .zip(&self.scale)
            .map(|(&b, &s)| if s > 0.0 { b / s } else { 0.0 })
            .collect();
        let intercept =
            self.b0 - coefficients.iter().zip(&self.mean).map(|(c, m)| c * m).sum::<f64>();
        FittedModel {
            feature_names: self.design.names().to_vec(),
            coefficients,
            intercept,
            lambda,
            converged,
            n_iters,
            log_likelihood: log_likelihood_from_eta(&self.eta, self.y),
            objective_trace: trace,
        }
    }

    #[cfg(test)]
    pub(crate) fn penalized_gradient_parts(&self) -> Vec<f64> {
        let resid: Vec<f64> = self
            .eta
            .iter()
            .zip(self.y)
            .map(|(&e, &yi)| f64::from(u8::from(yi)) - sigmoid(e))
            .collect();
        let r: f64 = resid.iter().sum();
        (0..self.design.n_cols())
            .map(|j| {
                let (idx, val) = self.design.column(j);
                let sxr: f64 = idx.iter().zip(val).map(|(&i, &x)| x * resid[i as usize]).sum();
                (sxr - self.mean[j] * r) / self.scale[j]
            })
            .collect()
    }
}

/// Fits a penalized logistic regression. Columns with zero variance get a
/// zero coefficient.
pub fn fit(design: &Design, y: &[bool], opts: &FitOptions) -> Result<FittedModel> {
    Solver::new(design, y)?.run(opts)
}

/// Gradient of the unpenalized log-likelihood with respect to the
/// original-scale coefficients and the intercept (last entry).
pub fn log_likelihood_gradient(design: &Design, y: &[bool], beta: &[f64], intercept: f64) -> Result<Vec<f64>> {
    let eta = design.linear_predictor(beta, intercept)?;
    let resid: Vec<f64> = eta
        .iter()
        .zip(y)
        .map(|(&e, &yi)| f64::from(u8::from(yi)) - sigmoid(e))
        .collect();
    let mut g: Vec<f64> = (0..design.n_cols())
        .map(|j| {
            let (idx, val) = design.column(j);
            idx.iter().zip(val).map(|(&i, &x)| x * resid[i as usize]).sum()
        })
        .collect();
    g.push(resid.iter().sum());
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrTest {
    pub statistic: f64,
    pub df: usize,
    pub p: f64,
    pub ll_full: f64,
    pub ll_reduced: f64,
}

/// Likelihood-ratio test of nested unpenalized models given by column
/// names of `design`.
pub fn likelihood_ratio_test(design: &Design, y: &[bool], full: &[&str], reduced: &[&str]) -> Result<LrTest> {
    if let Some(extra) = reduced.iter().find(|r| !full.contains(r)) {
        return Err(Error::InvalidArgument(format!(
            "reduced feature `{extra}` is not in the full model"
        )));
    }
    let full_design = design.select_columns(full)?;
    let reduced_design = design.select_columns(reduced)?;
    let opts = FitOptions::default();
    let ll_full = fit(&full_design, y, &opts)?.log_likelihood;
    let ll_reduced = fit(&reduced_design, y, &opts)?.log_likelihood;
    let df = full.len() - reduced.len();
    let statistic = (2.0 * (ll_full - ll_reduced)).max(0.0);
    let p = if df == 0 { 1.0 } else { chi_square_sf(statistic, df) };
    Ok(LrTest {
        statistic,
        df,
        p,
        ll_full,
        ll_reduced,
    })
}
