//! Evaluation and hypothesis-testing primitives.
//!
//! Everything here is a pure function over slices. Tail probabilities come
//! from the regularized incomplete gamma and complementary error functions.

mod dist;
mod kde;
mod rank;
mod roc;
mod hypothesis;

use serde::{Deserialize, Serialize};

pub use dist::{chi_square_sf, normal_cdf, normal_sf, pearson_r};
pub use kde::{trapezoid, write_xy_csv, GaussianKde};
pub(crate) use kde::csv_error;
pub use rank::midranks;
pub use roc::{delong_test, roc_auc, RocPoint, RocResult};
pub use hypothesis::{binomial_test, mann_whitney_u, mann_whitney_u_with, MwuMethod};

/// Alternative hypothesis for a test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tail {
    TwoSided,
    /// The first sample (or observed count) is stochastically larger.
    Greater,
    Less,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p: f64,
    pub tail: Tail,
    pub method: String,
    /// Set when the statistic is undefined (zero variance) and `p` was
    /// assigned by convention.
    #[serde(default)]
    pub degenerate: bool,
}

impl TestResult {
    pub(crate) fn new(statistic: f64, p: f64, tail: Tail, method: &str) -> Self {
        TestResult {
            statistic,
            p: p.clamp(0.0, 1.0),
            tail,
            method: method.to_string(),
            degenerate: false,
        }
    }
}
