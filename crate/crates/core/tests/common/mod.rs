//! Test-side oracles shared by integration tests.
#![allow(dead_code)]

pub mod oracles;
pub mod synth;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Unpenalized logistic MLE by Newton-Raphson on the full Hessian
/// (intercept first). `None` when the iteration does not settle, which
/// signals (quasi-)separation.
pub fn irls(rows: &[Vec<f64>], y: &[bool]) -> Option<Vec<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len) + 1;
    let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] });
    let yv = DVector::from_iterator(n, y.iter().map(|&b| if b { 1.0 } else { 0.0 }));
    let mut beta = DVector::zeros(p);
    for _ in 0..200 {
        let eta = &x * &beta;
        let prob = eta.map(|e| 1.0 / (1.0 + (-e).exp()));
        let w = prob.map(|q| q * (1.0 - q));
        let mut xtwx = DMatrix::zeros(p, p);
        for i in 0..n {
            let xi = x.row(i);
            xtwx += w[i] * xi.transpose() * xi;
        }
        let grad = x.transpose() * (&yv - &prob);
        let step = xtwx.lu().solve(&grad)?;
        beta += &step;
        if beta.amax() > 30.0 {
            return None;
        }
        if step.amax() < 1e-13 {
            return Some(beta.iter().copied().collect());
        }
    }
    None
}

/// Random design with Gaussian features and labels drawn from a random
/// logistic model, resampled until the MLE exists. Returns rows, labels
/// and the oracle solution.
pub fn synthetic_problem<R: Rng>(rng: &mut R, n: usize, p: usize) -> (Vec<Vec<f64>>, Vec<bool>, Vec<f64>) {
    loop {
        let truth: Vec<f64> = (0..=p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| StandardNormal.sample(rng)).collect())
            .collect();
        let y: Vec<bool> = rows
            .iter()
            .map(|r| {
                let z = truth[0] + r.iter().zip(&truth[1..]).map(|(a, b)| a * b).sum::<f64>();
                rng.random::<f64>() < 1.0 / (1.0 + (-z).exp())
            })
            .collect();
        let pos = y.iter().filter(|v| **v).count();
        if pos < 3 || pos > n - 3 {
            continue;
        }
        if let Some(beta) = irls(&rows, &y) {
            return (rows, y, beta);
        }
    }
}
