use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::dist::normal_sf;
use super::rank::midranks;
use super::{Tail, TestResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    pub auc: f64,
    /// From (0,0) to (1,1); the first point carries an infinite threshold.
    pub curve: Vec<RocPoint>,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl RocResult {
    /// Trapezoidal area under the exported curve.
    pub fn curve_area(&self) -> f64 {
        self.curve
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
            .sum()
    }
}

fn class_counts(labels: &[bool]) -> (usize, usize) {
    let n_pos = labels.iter().filter(|&&l| l).count();
    (n_pos, labels.len() - n_pos)
}

/// Area under the ROC curve via the rank-sum statistic, with ties counted
/// as half a concordant pair.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocResult> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let (n_pos, n_neg) = class_counts(labels);
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let ranks = midranks(scores)?;
    let pos_rank_sum: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(r, _)| *r)
        .sum();
    let np = n_pos as f64;
    let u = pos_rank_sum - np * (np + 1.0) / 2.0;
    let auc = u / (np * n_neg as f64);

    Ok(RocResult {
        auc,
        curve: roc_curve(scores, labels, n_pos, n_neg),
        n_pos,
        n_neg,
    })
}

fn roc_curve(scores: &[f64], labels: &[bool], n_pos: usize, n_neg: usize) -> Vec<RocPoint> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    let mut curve = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        curve.push(RocPoint {
            threshold,
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
    }
    curve
}

/// Structural components of the AUC: for each positive, the fraction of
/// negatives it outranks; for each negative, the fraction of positives that
/// outrank it.
fn placements(scores: &[f64], labels: &[bool]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(s, _)| *s).collect();
    let (m, n) = (pos.len() as f64, neg.len() as f64);
    let all = midranks(scores)?;
    let pos_ranks = midranks(&pos)?;
    let neg_ranks = midranks(&neg)?;
    let all_pos: Vec<f64> = all.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| *r).collect();
    let all_neg: Vec<f64> = all.iter().zip(labels).filter(|(_, &l)| !l).map(|(r, _)| *r).collect();

    let v10: Vec<f64> = all_pos.iter().zip(&pos_ranks).map(|(a, w)| (a - w) / n).collect();
    let v01: Vec<f64> = all_neg.iter().zip(&neg_ranks).map(|(a, w)| 1.0 - (a - w) / m).collect();
    let auc = v10.iter().sum::<f64>() / m;
    Ok((auc, v10, v01))
}

fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    if a.len() < 2 {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0)
}

/// DeLong's nonparametric test for the difference between two correlated
/// AUCs computed on the same instances. The statistic is
/// `(auc_a - auc_b) / sd`; the p-value is two-sided.
pub fn delong_test(scores_a: &[f64], scores_b: &[f64], labels: &[bool]) -> Result<TestResult> {
    if scores_a.len() != labels.len() || scores_b.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "delong_test: {} and {} scores for {} labels",
            scores_a.len(),
            scores_b.len(),
            labels.len()
        )));
    }
    let (n_pos, n_neg) = class_counts(labels);
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let (auc_a, v10a, v01a) = placements(scores_a, labels)?;
    let (auc_b, v10b, v01b) = placements(scores_b, labels)?;
    let (m, n) = (n_pos as f64, n_neg as f64);

    let s10 = covariance(&v10a, &v10a) + covariance(&v10b, &v10b) - 2.0 * covariance(&v10a, &v10b);
    let s01 = covariance(&v01a, &v01a) + covariance(&v01b, &v01b) - 2.0 * covariance(&v01a, &v01b);
    let var = s10 / m + s01 / n;
    let diff = auc_a - auc_b;

    const METHOD: &str = "delong";
    if var.is_nan() || var <= 1e-300 {
        let mut r = if diff.abs() <= f64::EPSILON {
            TestResult::new(0.0, 1.0, Tail::TwoSided, METHOD)
        } else {
            TestResult::new(diff.signum() * f64::INFINITY, 0.0, Tail::TwoSided, METHOD)
        };
        r.degenerate = true;
        return Ok(r);
    }
    let z = diff / var.sqrt();
    Ok(TestResult::new(z, 2.0 * normal_sf(z.abs()), Tail::TwoSided, METHOD))
}
