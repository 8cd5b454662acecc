use statrs::function::factorial::ln_binomial;

use super::dist::{normal_cdf, normal_sf};
use super::rank::{midranks, tie_group_sizes};
use super::{Tail, TestResult};
use crate::error::{Error, Result};

/// How the Mann–Whitney null distribution is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MwuMethod {
    /// Exact permutation distribution for small pooled samples, normal
    /// approximation otherwise.
    Auto,
    /// Exact permutation distribution of the rank sum (ties included).
    Exact,
    /// Normal approximation with tie-corrected variance and continuity
    /// correction.
    Asymptotic,
}

/// Pooled sample size up to which [`MwuMethod::Auto`] enumerates exactly.
const EXACT_MAX_POOLED: usize = 50;

/// Mann–Whitney U test. The statistic is `U_x`, the number of (x, y) pairs
/// with x > y plus half the ties, so `U_x / (n_x n_y)` is the AUC of x
/// against y. `Tail::Greater` tests whether x is stochastically larger.
pub fn mann_whitney_u(x: &[f64], y: &[f64], tail: Tail) -> Result<TestResult> {
    mann_whitney_u_with(x, y, tail, MwuMethod::Auto)
}

pub fn mann_whitney_u_with(
    x: &[f64],
    y: &[f64],
    tail: Tail,
    method: MwuMethod,
) -> Result<TestResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidArgument(
            "mann_whitney_u needs two non-empty samples".into(),
        ));
    }
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = midranks(&pooled)?;
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let rank_sum_x: f64 = ranks[..x.len()].iter().sum();
    let u = rank_sum_x - nx * (nx + 1.0) / 2.0;

    let exact = match method {
        MwuMethod::Exact => true,
        MwuMethod::Asymptotic => false,
        MwuMethod::Auto => pooled.len() <= EXACT_MAX_POOLED,
    };
    if exact {
        let p = exact_rank_sum_p(&ranks, x.len(), tail);
        return Ok(TestResult::new(u, p, tail, "mann-whitney-exact"));
    }

    let n = nx + ny;
    let tie_term: f64 = tie_group_sizes(&pooled)
        .into_iter()
        .map(|t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let var = nx * ny / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let mean = nx * ny / 2.0;
    if var.is_nan() || var <= 0.0 {
        let mut r = TestResult::new(u, 1.0, tail, "mann-whitney-normal");
        r.degenerate = true;
        return Ok(r);
    }
    let sd = var.sqrt();
    let p = match tail {
        Tail::TwoSided => {
            let z = ((u - mean).abs() - 0.5).max(0.0) / sd;
            2.0 * normal_sf(z)
        }
        Tail::Greater => normal_sf((u - mean - 0.5) / sd),
        Tail::Less => normal_cdf((u - mean + 0.5) / sd),
    };
    Ok(TestResult::new(u, p, tail, "mann-whitney-normal"))
}

/// Exact null distribution of the x rank sum by dynamic programming over
/// doubled midranks (always integers).
fn exact_rank_sum_p(ranks: &[f64], nx: usize, tail: Tail) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = {
        let mut d = doubled.clone();
        d.sort_unstable_by(|a, b| b.cmp(a));
        d.iter().take(nx).sum()
    };
    // ways[j][s]: number of size-j subsets with doubled rank sum s
    let mut ways = vec![vec![0.0f64; max_sum + 1]; nx + 1];
    ways[0][0] = 1.0;
    for &r in &doubled {
        for j in (1..=nx).rev() {
            for s in (r..=max_sum).rev() {
                let add = ways[j - 1][s - r];
                if add != 0.0 {
                    ways[j][s] += add;
                }
            }
        }
    }
    let total: f64 = ways[nx].iter().sum();
    let observed: usize = doubled[..nx].iter().sum();
    let le: f64 = ways[nx][..=observed].iter().sum::<f64>() / total;
    let ge: f64 = ways[nx][observed..].iter().sum::<f64>() / total;
    match tail {
        Tail::Greater => ge,
        Tail::Less => le,
        Tail::TwoSided => (2.0 * le.min(ge)).min(1.0),
    }
}

/// Exact binomial test of `k` successes in `n` trials against rate `p0`.
///
/// The two-sided p-value sums every outcome whose probability does not
/// exceed that of the observed count (with a 1e-7 relative slack for
/// rounding). The statistic is the observed proportion.
pub fn binomial_test(k: u64, n: u64, p0: f64, tail: Tail) -> Result<TestResult> {
    if n == 0 {
        return Err(Error::InvalidArgument("binomial_test with n = 0".into()));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds n = {n}")));
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::InvalidArgument(format!("p0 = {p0} outside (0, 1)")));
    }
    let ln_p = p0.ln();
    let ln_q = (1.0 - p0).ln();
    let pmf = |i: u64| (ln_binomial(n, i) + i as f64 * ln_p + (n - i) as f64 * ln_q).exp();

    let p = match tail {
        Tail::Greater => (k..=n).map(pmf).sum::<f64>(),
        Tail::Less => (0..=k).map(pmf).sum::<f64>(),
        Tail::TwoSided => {
            let cutoff = pmf(k) * (1.0 + 1e-7);
            (0..=n).map(pmf).filter(|&v| v <= cutoff).sum::<f64>()
        }
    };
    Ok(TestResult::new(k as f64 / n as f64, p, tail, "binomial-exact"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_samples() {
        let x = [1.0, 2.0, 3.0];
        let y = [4.0, 5.0, 6.0];
        let r = mann_whitney_u(&x, &y, Tail::Less).unwrap();
        assert_eq!(r.statistic, 0.0);
        // 3! 3! / 6! = 1/20
        assert!((r.p - 0.05).abs() < 1e-15);
        let approx = mann_whitney_u_with(&x, &y, Tail::Less, MwuMethod::Asymptotic).unwrap();
        assert!((approx.p - 0.05).abs() < 0.01);
    }

    #[test]
    fn identical_samples_two_sided() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let r = mann_whitney_u(&x, &x, Tail::TwoSided).unwrap();
        assert!(r.p > 0.99);
        let a = mann_whitney_u_with(&x, &x, Tail::TwoSided, MwuMethod::Asymptotic).unwrap();
        assert!(a.p > 0.99);
    }

    #[test]
    fn all_tied_is_degenerate_asymptotically() {
        let r = mann_whitney_u_with(&[1.0; 30], &[1.0; 40], Tail::TwoSided, MwuMethod::Asymptotic)
            .unwrap();
        assert_eq!(r.p, 1.0);
        assert!(r.degenerate);
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(mann_whitney_u(&[], &[1.0], Tail::TwoSided).is_err());
    }

    #[test]
    fn binomial_closed_forms() {
        let r = binomial_test(10, 10, 0.5, Tail::Greater).unwrap();
        assert!((r.p - 0.5f64.powi(10)).abs() < 1e-12);
        let center = binomial_test(50, 100, 0.5, Tail::Greater).unwrap();
        assert!(center.p > 0.5);
        assert!(binomial_test(0, 0, 0.5, Tail::Greater).is_err());
        assert!(binomial_test(3, 2, 0.5, Tail::Greater).is_err());
        assert!(binomial_test(1, 2, 1.0, Tail::Greater).is_err());
    }

    #[test]
    fn binomial_two_sided_symmetric_case() {
        // symmetric at p0 = 0.5: two-sided = 2 * one-sided for k below center
        let two = binomial_test(2, 10, 0.5, Tail::TwoSided).unwrap();
        let one = binomial_test(2, 10, 0.5, Tail::Less).unwrap();
        assert!((two.p - 2.0 * one.p).abs() < 1e-12);
    }
}
