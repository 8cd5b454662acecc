//! End-to-end analyses: regression with likelihood-ratio tests, held-out
//! prediction, reciprocity follow-through, topic discovery, temporal
//! summaries and interpretation curves. Every report is a pure function of
//! its inputs, the configuration and the seed, and can be written as CSV
//! plus JSON.

mod curves;
mod prediction;
mod reciprocity;
mod regression;
mod topics;

pub use curves::{run_interpretation_curves, Curves, KarmaPoint, LengthPoint};
pub use prediction::{
    run_prediction_study, train_artifact, Comparison, FeatureSet, PredictionRow,
    PredictionStudyReport,
};
pub use reciprocity::{
    reciprocated, run_reciprocity_study, ReciprocityDefinition, ReciprocityReport, SubgroupRate,
};
pub use regression::{regression_on_design, run_regression_study, RegressionRow, RegressionStudyReport};
pub use topics::{run_topic_study, temporal_summary, TemporalSummary, TopicRow, TopicStudyReport};

use std::collections::HashSet;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::SimilarityOptions;
use crate::stats::csv_error;

/// Tunable settings shared by the studies, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub seed: u64,
    pub dev_fraction: f64,
    pub cv_folds: usize,
    pub n_lambdas: usize,
    pub lambda_min_ratio: f64,
    pub ngram_min_df: usize,
    pub topics: TopicConfig,
    pub reciprocity: ReciprocityDefinition,
    /// Top fraction of karma counted as high status in the reciprocity study.
    pub high_status_fraction: f64,
    pub similarity: SimilarityOptions,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            seed: 0,
            dev_fraction: 0.7,
            cv_folds: 5,
            n_lambdas: 20,
            lambda_min_ratio: 1e-4,
            ngram_min_df: 3,
            topics: TopicConfig::default(),
            reciprocity: ReciprocityDefinition::Either,
            high_status_fraction: 0.2,
            similarity: SimilarityOptions::default(),
        }
    }
}

impl StudyConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopicConfig {
    pub k: usize,
    pub top_terms: usize,
    pub min_df: usize,
    pub sparseness: Option<f64>,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for TopicConfig {
    fn default() -> Self {
        TopicConfig {
            k: 10,
            top_terms: 15,
            min_df: 5,
            sparseness: Some(0.5),
            max_iters: 300,
            tol: 1e-5,
        }
    }
}

/// Significance marks at the 0.001, 0.01 and 0.05 levels.
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// The request ids a fitting stage looked at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub stage: String,
    pub ids: Vec<String>,
}

pub type Observer<'a> = Option<&'a dyn Fn(&AuditEvent)>;

/// Thread-safe collector of [`AuditEvent`]s.
#[derive(Debug, Default)]
pub struct AccessLog {
    events: Mutex<Vec<AuditEvent>>,
}

impl AccessLog {
    pub fn record(&self, e: &AuditEvent) {
        self.events.lock().expect("access log poisoned").push(e.clone());
    }

    pub fn events(&self) -> Vec<AuditEvent> {
        self.events.lock().expect("access log poisoned").clone()
    }

    /// Every id seen by any stage whose name starts with `prefix`.
    pub fn touched(&self, prefix: &str) -> HashSet<String> {
        self.events()
            .into_iter()
            .filter(|e| e.stage.starts_with(prefix))
            .flat_map(|e| e.ids)
            .collect()
    }
}

pub(crate) fn emit(observer: Observer<'_>, stage: &str, ids: impl IntoIterator<Item = String>) {
    if let Some(f) = observer {
        f(&AuditEvent {
            stage: stage.to_string(),
            ids: ids.into_iter().collect(),
        });
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value)?;
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(0.0009), "***");
        assert_eq!(stars(0.001), "**");
        assert_eq!(stars(0.009), "**");
        assert_eq!(stars(0.01), "*");
        assert_eq!(stars(0.049), "*");
        assert_eq!(stars(0.05), "");
        assert_eq!(stars(0.7), "");
    }

    #[test]
    fn config_from_partial_toml() {
        let c = StudyConfig::from_toml_str("seed = 9\n[topics]\nk = 4\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.topics.k, 4);
        assert_eq!(c.topics.top_terms, 15);
        assert_eq!(c.dev_fraction, 0.7);
        assert!(StudyConfig::from_toml_str("seed = \"x\"").is_err());
    }
}
