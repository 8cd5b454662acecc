use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ensure_dir, stars, write_csv, write_json};
use crate::corpus::Corpus;
use crate::error::Result;
use crate::features::{encode, extract_corpus, feature_names, fit_encoder, EncoderMeta, Lexicons, Scheme};
use crate::glm::{fit, likelihood_ratio_test, Design, FitOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionRow {
    pub feature: String,
    pub estimate: f64,
    pub lr_statistic: f64,
    pub p: f64,
    pub stars: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionStudyReport {
    pub n: usize,
    pub intercept: f64,
    pub log_likelihood: f64,
    pub converged: bool,
    pub rows: Vec<RegressionRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoder: Option<EncoderMeta>,
}

impl RegressionStudyReport {
    pub fn row(&self, feature: &str) -> Option<&RegressionRow> {
        self.rows.iter().find(|r| r.feature == feature)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        ensure_dir(dir)?;
        write_csv(&dir.join("regression.csv"), &self.rows)?;
        write_json(&dir.join("regression.json"), self)
    }
}

/// Unpenalized fit of every column plus one likelihood-ratio test per
/// column against the model without it.
pub fn regression_on_design(design: &Design, y: &[bool]) -> Result<RegressionStudyReport> {
    let model = fit(design, y, &FitOptions::default())?;
    let names: Vec<&str> = design.names().iter().map(String::as_str).collect();
    let mut rows = Vec::with_capacity(names.len());
    for (j, name) in names.iter().enumerate() {
        let reduced: Vec<&str> = names.iter().copied().filter(|n| n != name).collect();
        let lr = likelihood_ratio_test(design, y, &names, &reduced)?;
        rows.push(RegressionRow {
            feature: name.to_string(),
            estimate: model.coefficients[j],
            lr_statistic: lr.statistic,
            p: lr.p,
            stars: stars(lr.p).to_string(),
        });
    }
    Ok(RegressionStudyReport {
        n: design.n_rows(),
        intercept: model.intercept,
        log_likelihood: model.log_likelihood,
        converged: model.converged,
        rows,
        encoder: None,
    })
}

/// Regression-scheme features of the development corpus, encoded with
/// statistics of that same corpus.
pub fn run_regression_study(dev: &Corpus, lexicons: &Lexicons) -> Result<RegressionStudyReport> {
    let raw = extract_corpus(dev, lexicons)?;
    let meta = fit_encoder(&raw, dev.epoch()?)?;
    let rows: Vec<Vec<f64>> = raw
        .iter()
        .map(|r| encode(r, &meta, Scheme::Regression).map(|v| v.values))
        .collect::<Result<_>>()?;
    let names = feature_names(Scheme::Regression).iter().map(|s| s.to_string()).collect();
    let design = Design::from_rows(names, &rows)?;
    let mut report = regression_on_design(&design, &dev.labels())?;
    report.encoder = Some(meta);
    Ok(report)
}
