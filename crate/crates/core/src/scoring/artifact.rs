use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    feature_names, EncoderMeta, FeatureVector, Scheme, DECILE_FEATURES, MEDIAN_FEATURES,
};
use crate::glm::{sigmoid, FittedModel};

pub const ARTIFACT_FORMAT: u32 = 1;

/// Fit diagnostics carried along for inspection.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub converged: bool,
    pub n_iters: usize,
    pub log_likelihood: Option<f64>,
    pub n_train: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv_auc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// A trained model together with everything needed to encode new drafts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format: u32,
    pub scheme: Scheme,
    pub schema_id: String,
    pub feature_names: Vec<String>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    pub encoder: EncoderMeta,
    pub corpus_fingerprint: String,
    pub diagnostics: Diagnostics,
}

impl ModelArtifact {
    pub fn from_model(
        model: &FittedModel,
        encoder: EncoderMeta,
        scheme: Scheme,
        corpus_fingerprint: &str,
        n_train: usize,
    ) -> Result<Self> {
        let art = ModelArtifact {
            format: ARTIFACT_FORMAT,
            scheme,
            schema_id: encoder.schema_id(scheme),
            feature_names: model.feature_names.clone(),
            intercept: model.intercept,
            coefficients: model.coefficients.clone(),
            lambda: model.lambda,
            encoder,
            corpus_fingerprint: corpus_fingerprint.to_string(),
            diagnostics: Diagnostics {
                converged: model.converged,
                n_iters: model.n_iters,
                log_likelihood: Some(model.log_likelihood),
                n_train,
                cv_auc: None,
                note: None,
            },
        };
        art.validate()?;
        Ok(art)
    }

    /// Fixed regression-scheme reference coefficients, paired with
    /// illustrative encoder statistics in which the median karma and the
    /// median community age both fall in decile 5, median length is 74
    /// words, and any narrative or sentiment hit counts as above median.
    pub fn reference() -> Self {
        let coefficients: [(&str, f64); 15] = [
            ("community_age_decile", -0.13),
            ("first_half_of_month", 0.22),
            ("gratitude", 0.27),
            ("including_image", 0.81),
            ("reciprocity", 0.32),
            ("strong_positive_sentiment", 0.14),
            ("strong_negative_sentiment", -0.07),
            ("length_100_words", 0.30),
            ("karma_decile", 0.13),
            ("posted_in_raop_before", 1.34),
            ("narrative_craving", -0.34),
            ("narrative_family", 0.22),
            ("narrative_job", 0.26),
            ("narrative_money", 0.19),
            ("narrative_student", 0.09),
        ];
        let mut medians: BTreeMap<String, f64> =
            MEDIAN_FEATURES.iter().map(|n| (n.to_string(), 0.0)).collect();
        medians.insert("karma".into(), 120.0);
        medians.insert("community_age_months".into(), 15.0);
        medians.insert("n_words".into(), 74.0);
        medians.insert("account_age_days".into(), 180.0);
        let mut deciles: BTreeMap<String, Vec<f64>> =
            DECILE_FEATURES.iter().map(|n| (n.to_string(), vec![0.0; 9])).collect();
        deciles.insert(
            "karma".into(),
            vec![0.0, 2.0, 10.0, 40.0, 120.0, 300.0, 700.0, 1500.0, 4000.0],
        );
        deciles.insert(
            "community_age_months".into(),
            (1..=9).map(|d| 3.0 * d as f64).collect(),
        );
        let encoder = EncoderMeta {
            epoch: REFERENCE_EPOCH,
            n: 0,
            medians,
            deciles,
            source: "reference".into(),
        };
        ModelArtifact {
            format: ARTIFACT_FORMAT,
            scheme: Scheme::Regression,
            schema_id: encoder.schema_id(Scheme::Regression),
            feature_names: coefficients.iter().map(|(n, _)| n.to_string()).collect(),
            intercept: -2.02,
            coefficients: coefficients.iter().map(|(_, b)| *b).collect(),
            lambda: 0.0,
            encoder,
            corpus_fingerprint: "reference".into(),
            diagnostics: Diagnostics {
                converged: true,
                note: Some("reference coefficients with illustrative encoder statistics".into()),
                ..Diagnostics::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != ARTIFACT_FORMAT {
            return Err(Error::Schema(format!("unsupported artifact format {}", self.format)));
        }
        let expected = feature_names(self.scheme);
        if self.feature_names.len() != expected.len()
            || self.feature_names.iter().zip(expected).any(|(a, b)| a != b)
        {
            return Err(Error::Schema(format!(
                "artifact features {:?} do not match the {} scheme",
                self.feature_names,
                self.scheme.name()
            )));
        }
        if self.coefficients.len() != self.feature_names.len() {
            return Err(Error::Schema(format!(
                "{} coefficients for {} features",
                self.coefficients.len(),
                self.feature_names.len()
            )));
        }
        if !self.intercept.is_finite() || self.coefficients.iter().any(|b| !b.is_finite()) {
            return Err(Error::Schema("non-finite coefficient".into()));
        }
        let id = self.encoder.schema_id(self.scheme);
        if id != self.schema_id {
            return Err(Error::Schema(format!(
                "artifact schema {} does not match its encoder ({id})",
                self.schema_id
            )));
        }
        for name in MEDIAN_FEATURES {
            self.encoder.median(name)?;
        }
        for name in DECILE_FEATURES {
            self.encoder.cuts(name)?;
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let art: ModelArtifact = serde_json::from_str(s)?;
        art.validate()?;
        Ok(art)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string_pretty(self)?;
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.coefficients[i])
    }

    pub fn logit(&self, x: &FeatureVector) -> Result<f64> {
        if x.schema_id != self.schema_id {
            return Err(Error::Schema(format!(
                "vector encoded for {} scored by {}",
                x.schema_id, self.schema_id
            )));
        }
        Ok(self.intercept
            + x.values.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum::<f64>())
    }

    pub fn predict_probability(&self, x: &FeatureVector) -> Result<f64> {
        Ok(sigmoid(self.logit(x)?))
    }
}

/// Community start used by the reference artifact (2010-12-08 UTC).
pub const REFERENCE_EPOCH: i64 = 1_291_766_400;
