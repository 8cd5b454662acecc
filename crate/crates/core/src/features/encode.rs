use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Narrative, RawFeatures};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Binary narratives and sentiment, length in hundreds of words, karma
    /// and community age as deciles.
    Regression,
    /// As `Regression` with narrative deciles in place of narrative binaries.
    Prediction,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Regression => "regression",
            Scheme::Prediction => "prediction",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Scheme::Regression),
            "prediction" => Ok(Scheme::Prediction),
            other => Err(Error::InvalidArgument(format!("unknown scheme `{other}`"))),
        }
    }
}

const REGRESSION_FEATURES: [&str; 15] = [
    "community_age_decile",
    "first_half_of_month",
    "gratitude",
    "including_image",
    "reciprocity",
    "strong_positive_sentiment",
    "strong_negative_sentiment",
    "length_100_words",
    "karma_decile",
    "posted_in_raop_before",
    "narrative_craving",
    "narrative_family",
    "narrative_job",
    "narrative_money",
    "narrative_student",
];

const PREDICTION_FEATURES: [&str; 15] = [
    "community_age_decile",
    "first_half_of_month",
    "gratitude",
    "including_image",
    "reciprocity",
    "strong_positive_sentiment",
    "strong_negative_sentiment",
    "length_100_words",
    "karma_decile",
    "posted_in_raop_before",
    "narrative_craving_decile",
    "narrative_family_decile",
    "narrative_job_decile",
    "narrative_money_decile",
    "narrative_student_decile",
];

pub fn feature_names(scheme: Scheme) -> &'static [&'static str] {
    match scheme {
        Scheme::Regression => &REGRESSION_FEATURES,
        Scheme::Prediction => &PREDICTION_FEATURES,
    }
}

/// Raw quantities whose development-split median is recorded.
pub const MEDIAN_FEATURES: [&str; 12] = [
    "narrative_money",
    "narrative_job",
    "narrative_student",
    "narrative_family",
    "narrative_craving",
    "pos_sentence_frac",
    "neg_sentence_frac",
    "karma",
    "community_age_months",
    "n_words",
    "account_age_days",
    "posted_before",
];

/// Raw quantities whose decile cut points are recorded.
pub const DECILE_FEATURES: [&str; 7] = [
    "karma",
    "community_age_months",
    "narrative_money",
    "narrative_job",
    "narrative_student",
    "narrative_family",
    "narrative_craving",
];

fn raw_value(raw: &RawFeatures, name: &str) -> f64 {
    match name {
        "pos_sentence_frac" => raw.pos_sentence_frac,
        "neg_sentence_frac" => raw.neg_sentence_frac,
        "karma" => raw.karma as f64,
        "community_age_months" => raw.community_age_months as f64,
        "n_words" => raw.n_words as f64,
        "account_age_days" => raw.account_age_days,
        "posted_before" => f64::from(u8::from(raw.posted_before)),
        other => {
            let n = other.strip_prefix("narrative_").expect("known raw feature name");
            let n = Narrative::ALL.iter().find(|x| x.name() == n).expect("known narrative");
            raw.narrative(*n)
        }
    }
}

/// Percentile of sorted data by linear interpolation between closest ranks
/// (`q` in 0..=100).
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let pos = (q / 100.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// 1 plus the number of cut points strictly below `value`.
pub fn decile_code(value: f64, cuts: &[f64]) -> f64 {
    (1 + cuts.iter().filter(|&&c| c < value).count()) as f64
}

/// Development-split statistics frozen for encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderMeta {
    /// Start of the community, for community-age features of new requests.
    pub epoch: i64,
    pub n: usize,
    pub medians: BTreeMap<String, f64>,
    /// Nine cut points (10th to 90th percentile) per decile-coded feature.
    pub deciles: BTreeMap<String, Vec<f64>>,
    /// Hash of the request ids the statistics were computed from.
    pub source: String,
}

impl EncoderMeta {
    /// Hex SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("encoder meta serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn schema_id(&self, scheme: Scheme) -> String {
        format!("{}/{}", scheme.name(), &self.fingerprint()[..16])
    }

    pub fn median(&self, name: &str) -> Result<f64> {
        self.medians
            .get(name)
            .copied()
            .ok_or_else(|| Error::Schema(format!("encoder has no median for `{name}`")))
    }

    pub fn cuts(&self, name: &str) -> Result<&[f64]> {
        match self.deciles.get(name) {
            Some(c) if c.len() == 9 => Ok(c),
            Some(c) => Err(Error::Schema(format!(
                "`{name}` has {} decile cut points, expected 9",
                c.len()
            ))),
            None => Err(Error::Schema(format!("encoder has no deciles for `{name}`"))),
        }
    }
}

/// Fits medians and decile cut points on development-split features.
pub fn fit_encoder(dev_raw: &[RawFeatures], epoch: i64) -> Result<EncoderMeta> {
    if dev_raw.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let sorted = |name: &str| {
        let mut v: Vec<f64> = dev_raw.iter().map(|r| raw_value(r, name)).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let medians = MEDIAN_FEATURES
        .iter()
        .map(|&n| (n.to_string(), percentile(&sorted(n), 50.0)))
        .collect();
    let deciles = DECILE_FEATURES
        .iter()
        .map(|&n| {
            let v = sorted(n);
            (n.to_string(), (1..=9).map(|d| percentile(&v, 10.0 * d as f64)).collect())
        })
        .collect();
    let mut h = Sha256::new();
    for r in dev_raw {
        h.update(r.request_id.as_bytes());
        h.update([0u8]);
    }
    Ok(EncoderMeta {
        epoch,
        n: dev_raw.len(),
        medians,
        deciles,
        source: hex::encode(h.finalize()),
    })
}

/// Encoded model input tied to a scheme and an encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub scheme: Scheme,
    pub schema_id: String,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn names(&self) -> &'static [&'static str] {
        feature_names(self.scheme)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names().iter().position(|n| *n == name)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.position(name).map(|i| self.values[i])
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let i = self
            .position(name)
            .ok_or_else(|| Error::Schema(format!("no feature `{name}` in {}", self.schema_id)))?;
        self.values[i] = value;
        Ok(())
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        self.names().iter().copied().zip(self.values.iter().copied())
    }
}

pub fn encode(raw: &RawFeatures, meta: &EncoderMeta, scheme: Scheme) -> Result<FeatureVector> {
    let binary = |v: bool| if v { 1.0 } else { 0.0 };
    let above_median = |name: &str| -> Result<f64> { Ok(binary(raw_value(raw, name) > meta.median(name)?)) };
    let decile = |name: &str| -> Result<f64> { Ok(decile_code(raw_value(raw, name), meta.cuts(name)?)) };
    let mut values = vec![
        decile("community_age_months")?,
        binary(raw.first_half_month),
        binary(raw.gratitude),
        binary(raw.has_image),
        binary(raw.reciprocity),
        above_median("pos_sentence_frac")?,
        above_median("neg_sentence_frac")?,
        raw.n_words as f64 / 100.0,
        decile("karma")?,
        binary(raw.posted_before),
    ];
    for n in [
        Narrative::Craving,
        Narrative::Family,
        Narrative::Job,
        Narrative::Money,
        Narrative::Student,
    ] {
        let key = format!("narrative_{}", n.name());
        values.push(match scheme {
            Scheme::Regression => above_median(&key)?,
            Scheme::Prediction => decile(&key)?,
        });
    }
    debug_assert_eq!(values.len(), feature_names(scheme).len());
    Ok(FeatureVector {
        scheme,
        schema_id: meta.schema_id(scheme),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{extract_text, Lexicons, UserStatus};
    use proptest::prelude::*;

    fn raw_with(id: &str, karma: i64, money_frac: f64, n_words: usize) -> RawFeatures {
        let mut r = extract_text(id, "", "", 1000, 1000, UserStatus::default(), &Lexicons::default())
            .unwrap();
        r.karma = karma;
        r.narrative_frac[Narrative::Money.index()] = money_frac;
        r.n_words = n_words;
        r
    }

    #[test]
    fn percentile_oracle_on_1_to_100() {
        let raws: Vec<RawFeatures> = (1..=100).map(|k| raw_with(&k.to_string(), k, 0.0, 0)).collect();
        let meta = fit_encoder(&raws, 1000).unwrap();
        // (q/100)*(n-1) with n=100 puts the q-th percentile at 1 + 0.99q.
        let want = [10.9, 20.8, 30.7, 40.6, 50.5, 60.4, 70.3, 80.2, 90.1];
        for (got, want) in meta.cuts("karma").unwrap().iter().zip(want) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
        assert_eq!(meta.median("karma").unwrap(), 50.5);
        let low = encode(&raw_with("x", 3, 0.0, 0), &meta, Scheme::Regression).unwrap();
        assert_eq!(low.get("karma_decile"), Some(1.0));
        let high = encode(&raw_with("x", 1000, 0.0, 0), &meta, Scheme::Regression).unwrap();
        assert_eq!(high.get("karma_decile"), Some(10.0));
    }

    #[test]
    fn degenerate_distribution() {
        let raws: Vec<RawFeatures> = (0..20).map(|k| raw_with(&k.to_string(), 5, 0.1, 10)).collect();
        let meta = fit_encoder(&raws, 1000).unwrap();
        for r in &raws {
            for scheme in [Scheme::Regression, Scheme::Prediction] {
                let fv = encode(r, &meta, scheme).unwrap();
                assert_eq!(fv.get("karma_decile"), Some(1.0));
                assert_eq!(fv.get("community_age_decile"), Some(1.0));
                if scheme == Scheme::Regression {
                    assert_eq!(fv.get("narrative_money"), Some(0.0));
                } else {
                    assert_eq!(fv.get("narrative_money_decile"), Some(1.0));
                }
                assert_eq!(fv.get("strong_positive_sentiment"), Some(0.0));
            }
        }
        assert_eq!(fit_encoder(&raws, 1000).unwrap(), meta);
    }

    #[test]
    fn length_and_median_boundary() {
        let raws: Vec<RawFeatures> =
            [0.0, 0.1, 0.2].iter().enumerate().map(|(i, &f)| raw_with(&i.to_string(), 0, f, 0)).collect();
        let meta = fit_encoder(&raws, 1000).unwrap();
        let at = encode(&raw_with("m", 0, 0.1, 50), &meta, Scheme::Regression).unwrap();
        assert_eq!(at.get("narrative_money"), Some(0.0));
        assert_eq!(at.get("length_100_words"), Some(0.5));
        let above = encode(&raw_with("m", 0, 0.11, 0), &meta, Scheme::Regression).unwrap();
        assert_eq!(above.get("narrative_money"), Some(1.0));
    }

    #[test]
    fn names_and_schema() {
        assert_eq!(feature_names(Scheme::Regression).len(), 15);
        let raws = vec![raw_with("a", 1, 0.0, 0)];
        let mut meta = fit_encoder(&raws, 1000).unwrap();
        let fv = encode(&raws[0], &meta, Scheme::Prediction).unwrap();
        assert!(fv.schema_id.starts_with("prediction/"));
        meta.deciles.remove("karma");
        assert!(matches!(encode(&raws[0], &meta, Scheme::Regression), Err(Error::Schema(_))));
        assert!(matches!(fit_encoder(&[], 0), Err(Error::EmptyCorpus)));
    }

    proptest! {
        #[test]
        fn encoded_values_in_range(
            karmas in proptest::collection::vec(-50i64..5000, 1..60),
            fracs in proptest::collection::vec(0.0f64..1.0, 60),
            probe_karma in -100i64..10000,
            probe_frac in 0.0f64..1.0,
        ) {
            let raws: Vec<RawFeatures> = karmas
                .iter()
                .zip(&fracs)
                .enumerate()
                .map(|(i, (&k, &f))| raw_with(&i.to_string(), k, f, 10))
                .collect();
            let meta = fit_encoder(&raws, 1000).unwrap();
            for cuts in meta.deciles.values() {
                prop_assert!(cuts.windows(2).all(|w| w[0] <= w[1]));
            }
            let probe = raw_with("p", probe_karma, probe_frac, 10);
            for scheme in [Scheme::Regression, Scheme::Prediction] {
                let fv = encode(&probe, &meta, scheme).unwrap();
                for (name, v) in fv.named() {
                    if name.ends_with("_decile") {
                        prop_assert!((1.0..=10.0).contains(&v) && v.fract() == 0.0);
                    } else if name != "length_100_words" {
                        prop_assert!(v == 0.0 || v == 1.0, "{} = {}", name, v);
                    }
                }
            }
        }
    }
}
