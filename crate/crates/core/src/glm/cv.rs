use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sigmoid, Design, FitOptions, Solver};
use crate::error::{Error, Result};
use crate::stats::roc_auc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvOptions {
    pub n_folds: usize,
    pub n_lambdas: usize,
    /// Smallest grid value as a fraction of the largest.
    pub min_ratio: f64,
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            n_folds: 5,
            n_lambdas: 20,
            min_ratio: 1e-4,
            seed: 0,
            max_iters: 2_000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPath {
    /// Decreasing penalty grid.
    pub lambdas: Vec<f64>,
    pub mean_auc: Vec<f64>,
    pub best_index: usize,
    pub best_lambda: f64,
}

/// Fold number of every row, stratified by label: each class is shuffled
/// and dealt round-robin.
pub fn cv_folds(y: &[bool], n_folds: usize, seed: u64) -> Result<Vec<usize>> {
    if n_folds < 2 {
        return Err(Error::InvalidArgument("need at least 2 folds".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; y.len()];
    for class in [true, false] {
        let mut rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if rows.len() < n_folds {
            return Err(Error::Stratification(format!(
                "{} rows labelled {class} for {n_folds} folds",
                rows.len()
            )));
        }
        rows.shuffle(&mut rng);
        for (k, i) in rows.into_iter().enumerate() {
            fold[i] = k % n_folds;
        }
    }
    Ok(fold)
}

/// Receives the training-row indices of a fold.
pub type FoldObserver<'a> = dyn Fn(&[usize]) + 'a;

/// Chooses the penalty with the highest mean held-out AUC over a
/// logarithmic grid, fitting each fold along the grid with warm starts.
/// `observer`, if given, receives the row indices of every training set
/// used.
pub fn select_lambda(
    design: &Design,
    y: &[bool],
    opts: &CvOptions,
    observer: Option<&FoldObserver<'_>>,
) -> Result<LambdaPath> {
    if opts.n_lambdas == 0 || !(opts.min_ratio > 0.0 && opts.min_ratio < 1.0) {
        return Err(Error::InvalidArgument("invalid lambda grid".into()));
    }
    if let Some(obs) = observer {
        obs(&(0..y.len()).collect::<Vec<_>>());
    }
    let lambda_max = Solver::new(design, y)?.lambda_max().max(1e-8);
    let lambdas: Vec<f64> = (0..opts.n_lambdas)
        .map(|k| {
            let frac = if opts.n_lambdas == 1 { 0.0 } else { k as f64 / (opts.n_lambdas - 1) as f64 };
            lambda_max * opts.min_ratio.powf(frac)
        })
        .collect();
    let folds = cv_folds(y, opts.n_folds, opts.seed)?;
    let mut auc_sum = vec![0.0; lambdas.len()];
    for f in 0..opts.n_folds {
        let train: Vec<usize> = (0..y.len()).filter(|&i| folds[i] != f).collect();
        let held: Vec<usize> = (0..y.len()).filter(|&i| folds[i] == f).collect();
        if let Some(obs) = observer {
            obs(&train);
        }
        let train_x = design.select_rows(&train);
        let train_y: Vec<bool> = train.iter().map(|&i| y[i]).collect();
        let held_x = design.select_rows(&held);
        let held_y: Vec<bool> = held.iter().map(|&i| y[i]).collect();
        let mut solver = Solver::new(&train_x, &train_y)?;
        for (k, &lambda) in lambdas.iter().enumerate() {
            let model = solver.run(&FitOptions {
                lambda,
                max_iters: opts.max_iters,
                tol: opts.tol,
            })?;
            let scores: Vec<f64> = held_x
                .linear_predictor(&model.coefficients, model.intercept)?
                .into_iter()
                .map(sigmoid)
                .collect();
            auc_sum[k] += roc_auc(&scores, &held_y)?.auc;
        }
    }
    let mean_auc: Vec<f64> = auc_sum.iter().map(|s| s / opts.n_folds as f64).collect();
    let mut best_index = 0;
    for (k, &a) in mean_auc.iter().enumerate() {
        if a > mean_auc[best_index] {
            best_index = k;
        }
    }
    Ok(LambdaPath {
        best_lambda: lambdas[best_index],
        lambdas,
        mean_auc,
        best_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_stratified() {
        let y: Vec<bool> = (0..53).map(|i| i % 4 == 0).collect();
        let f = cv_folds(&y, 5, 7).unwrap();
        for k in 0..5 {
            let pos = (0..y.len()).filter(|&i| f[i] == k && y[i]).count();
            assert!((2..=3).contains(&pos));
        }
        assert_eq!(f, cv_folds(&y, 5, 7).unwrap());
        assert!(cv_folds(&[true, false, false], 5, 0).is_err());
    }
}
