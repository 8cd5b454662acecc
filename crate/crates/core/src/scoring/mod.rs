//! Scoring of draft requests against a trained model artifact.
//!
//! A draft is measured with the same detectors used for training, encoded
//! with the artifact's frozen encoder and decomposed into per-feature
//! contributions. What-if toggles act on the encoded vector directly.

mod artifact;

pub use artifact::{Diagnostics, ModelArtifact, ARTIFACT_FORMAT, REFERENCE_EPOCH};

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    decile_code, encode, extract_text, EncoderMeta, FeatureVector, Lexicons, Narrative,
    RawFeatures, Scheme, UserStatus,
};
use crate::glm::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DraftUser {
    #[serde(default)]
    pub karma: Option<i64>,
    #[serde(default)]
    pub posted_before: Option<bool>,
    #[serde(default)]
    pub account_age_days: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DraftRequest {
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub body: String,
    #[serde(default)]
    pub user: Option<DraftUser>,
    /// Unix seconds; the current time when absent.
    #[serde(default)]
    pub timestamp: Option<i64>,
}

impl DraftRequest {
    pub fn new(title: &str, body: &str) -> Self {
        DraftRequest {
            title: title.to_string(),
            body: body.to_string(),
            user: None,
            timestamp: None,
        }
    }

    pub fn at(mut self, timestamp: i64) -> Self {
        self.timestamp = Some(timestamp);
        self
    }
}

/// An edit applied to an encoded feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Toggle {
    AddImage,
    AddGratitude,
    AddReciprocity,
    AddWords { words: u32 },
    SetLength { words: u32 },
    Narrative { narrative: String, on: bool },
}

impl Toggle {
    pub fn id(&self) -> String {
        match self {
            Toggle::AddImage => "add-image".into(),
            Toggle::AddGratitude => "add-gratitude".into(),
            Toggle::AddReciprocity => "add-reciprocity".into(),
            Toggle::AddWords { words } => format!("add-{words}-words"),
            Toggle::SetLength { words } => format!("length-{words}-words"),
            Toggle::Narrative { narrative, on } => {
                format!("{}-{}", if *on { "enable" } else { "disable" }, narrative.to_lowercase())
            }
        }
    }

    pub fn description(&self) -> String {
        match self {
            Toggle::AddImage => "add a photo link as evidence".into(),
            Toggle::AddGratitude => "thank the community in advance".into(),
            Toggle::AddReciprocity => "offer to pay it forward".into(),
            Toggle::AddWords { words } => format!("write {words} more words"),
            Toggle::SetLength { words } => format!("make the request {words} words long"),
            Toggle::Narrative { narrative, on: true } => format!("explain the {narrative} situation"),
            Toggle::Narrative { narrative, on: false } => format!("leave out the {narrative} story"),
        }
    }

    pub fn apply(&self, x: &mut FeatureVector, meta: &EncoderMeta) -> Result<()> {
        match self {
            Toggle::AddImage => x.set("including_image", 1.0),
            Toggle::AddGratitude => x.set("gratitude", 1.0),
            Toggle::AddReciprocity => x.set("reciprocity", 1.0),
            Toggle::AddWords { words } => {
                let cur = x.get("length_100_words").unwrap_or(0.0);
                x.set("length_100_words", cur + f64::from(*words) / 100.0)
            }
            Toggle::SetLength { words } => x.set("length_100_words", f64::from(*words) / 100.0),
            Toggle::Narrative { narrative, on } => {
                let n = Narrative::from_name(narrative).ok_or_else(|| {
                    Error::InvalidArgument(format!("unknown narrative {narrative:?}"))
                })?;
                let key = format!("narrative_{}", n.name());
                match x.scheme {
                    Scheme::Regression => x.set(&key, if *on { 1.0 } else { 0.0 }),
                    Scheme::Prediction => {
                        let code = if *on { 10.0 } else { decile_code(0.0, meta.cuts(&key)?) };
                        x.set(&format!("{key}_decile"), code)
                    }
                }
            }
        }
    }

    /// Single edits offered for every draft.
    pub fn canonical() -> Vec<Toggle> {
        let mut out = vec![
            Toggle::AddImage,
            Toggle::AddGratitude,
            Toggle::AddReciprocity,
            Toggle::AddWords { words: 100 },
        ];
        for on in [true, false] {
            for n in Narrative::ALL {
                out.push(Toggle::Narrative {
                    narrative: n.name().to_string(),
                    on,
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    /// Measured quantity before encoding (count, fraction, decile source).
    pub raw: f64,
    pub encoded: f64,
    pub coefficient: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detected {
    pub narratives: BTreeMap<String, usize>,
    pub gratitude: bool,
    pub reciprocity: bool,
    pub image: bool,
    pub words: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIf {
    pub id: String,
    pub description: String,
    pub probability: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResult {
    pub probability: f64,
    pub logit: f64,
    pub intercept: f64,
    pub factors: Vec<Factor>,
    pub detected: Detected,
    pub what_if: Vec<WhatIf>,
    pub schema_id: String,
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureInfo {
    pub name: String,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub schema_id: String,
    pub scheme: Scheme,
    pub intercept: f64,
    pub features: Vec<FeatureInfo>,
    pub lambda: f64,
    pub corpus_fingerprint: String,
    pub encoder: EncoderMeta,
    pub diagnostics: Diagnostics,
}

/// Holds an artifact and the lexicons used to measure drafts.
#[derive(Debug, Clone)]
pub struct Scorer {
    artifact: ModelArtifact,
    lexicons: Lexicons,
}

fn now() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0)
}

impl Scorer {
    pub fn new(artifact: ModelArtifact) -> Result<Self> {
        Self::with_lexicons(artifact, Lexicons::default())
    }

    pub fn with_lexicons(artifact: ModelArtifact, lexicons: Lexicons) -> Result<Self> {
        artifact.validate()?;
        Ok(Scorer { artifact, lexicons })
    }

    pub fn artifact(&self) -> &ModelArtifact {
        &self.artifact
    }

    /// Requester status of a draft: supplied values, otherwise the
    /// development-split medians.
    pub fn status_for(&self, draft: &DraftRequest) -> Result<UserStatus> {
        let meta = &self.artifact.encoder;
        let user = draft.user.unwrap_or_default();
        Ok(UserStatus {
            karma: match user.karma {
                Some(k) => k,
                None => meta.median("karma")?.round() as i64,
            },
            posted_before: match user.posted_before {
                Some(b) => b,
                None => meta.median("posted_before")? > 0.5,
            },
            account_age_days: match user.account_age_days {
                Some(a) => a,
                None => meta.median("account_age_days")?,
            },
        })
    }

    pub fn measure(&self, draft: &DraftRequest) -> Result<(RawFeatures, FeatureVector, i64)> {
        let t = draft.timestamp.unwrap_or_else(now);
        let raw = extract_text(
            "draft",
            &draft.title,
            &draft.body,
            t,
            self.artifact.encoder.epoch,
            self.status_for(draft)?,
            &self.lexicons,
        )?;
        let x = encode(&raw, &self.artifact.encoder, self.artifact.scheme)?;
        Ok((raw, x, t))
    }

    pub fn probability(&self, x: &FeatureVector) -> Result<f64> {
        self.artifact.predict_probability(x)
    }

    /// Probability after applying `toggles` in order to `x`.
    pub fn probability_with(&self, x: &FeatureVector, toggles: &[Toggle]) -> Result<f64> {
        let mut y = x.clone();
        for t in toggles {
            t.apply(&mut y, &self.artifact.encoder)?;
        }
        self.probability(&y)
    }

    pub fn score(&self, draft: &DraftRequest) -> Result<ScoreResult> {
        let (raw, x, t) = self.measure(draft)?;
        let mut factors = Vec::with_capacity(x.values.len());
        let mut logit = self.artifact.intercept;
        for ((name, encoded), coefficient) in x.named().zip(&self.artifact.coefficients) {
            let contribution = coefficient * encoded;
            logit += contribution;
            factors.push(Factor {
                name: name.to_string(),
                raw: raw_source(&raw, name),
                encoded,
                coefficient: *coefficient,
                contribution,
            });
        }
        let probability = sigmoid(logit);
        let what_if = self.what_if_vector(&x, probability)?;
        Ok(ScoreResult {
            probability,
            logit,
            intercept: self.artifact.intercept,
            factors,
            detected: Detected {
                narratives: Narrative::ALL
                    .iter()
                    .map(|n| (n.name().to_string(), raw.narrative_counts[n.index()]))
                    .collect(),
                gratitude: raw.gratitude,
                reciprocity: raw.reciprocity,
                image: raw.has_image,
                words: raw.n_words,
            },
            what_if,
            schema_id: x.schema_id.clone(),
            timestamp: t,
        })
    }

    pub fn what_if(&self, draft: &DraftRequest) -> Result<Vec<WhatIf>> {
        let (_, x, _) = self.measure(draft)?;
        let p = self.probability(&x)?;
        self.what_if_vector(&x, p)
    }

    fn what_if_vector(&self, x: &FeatureVector, p: f64) -> Result<Vec<WhatIf>> {
        Toggle::canonical()
            .into_iter()
            .map(|t| {
                let q = self.probability_with(x, std::slice::from_ref(&t))?;
                Ok(WhatIf {
                    id: t.id(),
                    description: t.description(),
                    probability: q,
                    delta: q - p,
                })
            })
            .collect()
    }

    /// Scores a draft after a combination of toggles.
    pub fn evaluate(&self, draft: &DraftRequest, toggles: &[Toggle]) -> Result<WhatIf> {
        let (_, x, _) = self.measure(draft)?;
        let p = self.probability(&x)?;
        let q = self.probability_with(&x, toggles)?;
        Ok(WhatIf {
            id: toggles.iter().map(Toggle::id).collect::<Vec<_>>().join("+"),
            description: toggles.iter().map(Toggle::description).collect::<Vec<_>>().join("; "),
            probability: q,
            delta: q - p,
        })
    }

    pub fn model_info(&self) -> ModelInfo {
        let a = &self.artifact;
        ModelInfo {
            schema_id: a.schema_id.clone(),
            scheme: a.scheme,
            intercept: a.intercept,
            features: a
                .feature_names
                .iter()
                .zip(&a.coefficients)
                .map(|(n, b)| FeatureInfo {
                    name: n.clone(),
                    coefficient: *b,
                })
                .collect(),
            lambda: a.lambda,
            corpus_fingerprint: a.corpus_fingerprint.clone(),
            encoder: a.encoder.clone(),
            diagnostics: a.diagnostics.clone(),
        }
    }
}

fn raw_source(raw: &RawFeatures, encoded_name: &str) -> f64 {
    let flag = |b: bool| f64::from(u8::from(b));
    match encoded_name {
        "community_age_decile" => f64::from(raw.community_age_months),
        "first_half_of_month" => flag(raw.first_half_month),
        "gratitude" => flag(raw.gratitude),
        "including_image" => flag(raw.has_image),
        "reciprocity" => flag(raw.reciprocity),
        "strong_positive_sentiment" => raw.pos_sentence_frac,
        "strong_negative_sentiment" => raw.neg_sentence_frac,
        "length_100_words" => raw.n_words as f64,
        "karma_decile" => raw.karma as f64,
        "posted_in_raop_before" => flag(raw.posted_before),
        other => {
            let stem = other.trim_start_matches("narrative_").trim_end_matches("_decile");
            Narrative::from_name(stem).map_or(0.0, |n| raw.narrative(n))
        }
    }
}
