use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{emit, ensure_dir, stars, write_csv, write_json, Observer, StudyConfig};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::features::{encode, extract_corpus, feature_names, fit_encoder, Lexicons, Scheme};
use crate::glm::{fit, select_lambda, sigmoid, CvOptions, Design, FitOptions};
use crate::scoring::ModelArtifact;
use crate::stats::{delong_test, mann_whitney_u, roc_auc, write_xy_csv, Tail};
use crate::textkit::{ngram_counts, ngram_features, tokenize};

const TEMPORAL: [&str; 2] = ["community_age_decile", "first_half_of_month"];
const SOCIAL: [&str; 2] = ["karma_decile", "posted_in_raop_before"];
const TEXT: [&str; 9] = [
    "narrative_craving_decile",
    "narrative_family_decile",
    "narrative_job_decile",
    "narrative_money_decile",
    "narrative_student_decile",
    "including_image",
    "gratitude",
    "reciprocity",
    "length_100_words",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSet {
    Unigram,
    Bigram,
    Trigram,
    Text,
    Social,
    Temporal,
    TemporalSocial,
    TemporalSocialText,
    TemporalSocialTextUnigram,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 9] = [
        FeatureSet::Unigram,
        FeatureSet::Bigram,
        FeatureSet::Trigram,
        FeatureSet::Text,
        FeatureSet::Social,
        FeatureSet::Temporal,
        FeatureSet::TemporalSocial,
        FeatureSet::TemporalSocialText,
        FeatureSet::TemporalSocialTextUnigram,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::Unigram => "unigram",
            FeatureSet::Bigram => "bigram",
            FeatureSet::Trigram => "trigram",
            FeatureSet::Text => "text",
            FeatureSet::Social => "social",
            FeatureSet::Temporal => "temporal",
            FeatureSet::TemporalSocial => "temporal+social",
            FeatureSet::TemporalSocialText => "temporal+social+text",
            FeatureSet::TemporalSocialTextUnigram => "temporal+social+text+unigram",
        }
    }

    /// Encoded factor columns in the set.
    pub fn factors(self) -> Vec<&'static str> {
        match self {
            FeatureSet::Unigram | FeatureSet::Bigram | FeatureSet::Trigram => vec![],
            FeatureSet::Text => TEXT.to_vec(),
            FeatureSet::Social => SOCIAL.to_vec(),
            FeatureSet::Temporal => TEMPORAL.to_vec(),
            FeatureSet::TemporalSocial => [TEMPORAL.as_slice(), &SOCIAL].concat(),
            FeatureSet::TemporalSocialText | FeatureSet::TemporalSocialTextUnigram => {
                [TEMPORAL.as_slice(), &SOCIAL, &TEXT].concat()
            }
        }
    }

    /// N-gram order added to the set, if any.
    pub fn ngram(self) -> Option<usize> {
        match self {
            FeatureSet::Unigram | FeatureSet::TemporalSocialTextUnigram => Some(1),
            FeatureSet::Bigram => Some(2),
            FeatureSet::Trigram => Some(3),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub name: String,
    pub n_features: usize,
    pub n_nonzero: usize,
    pub lambda: f64,
    pub cv_auc: f64,
    pub test_auc: f64,
    /// Mann–Whitney test of positive against negative test scores, which is
    /// the test of the AUC against the random baseline.
    pub mwu_p: Option<f64>,
    pub stars: String,
    #[serde(skip)]
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub auc_a: f64,
    pub auc_b: f64,
    pub delong_z: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionStudyReport {
    pub n_dev: usize,
    pub n_test: usize,
    pub rows: Vec<PredictionRow>,
    pub comparisons: Vec<Comparison>,
    #[serde(skip)]
    pub test_labels: Vec<bool>,
}

impl PredictionStudyReport {
    pub fn row(&self, name: &str) -> Option<&PredictionRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn comparison(&self, a: &str, b: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.a == a && c.b == b)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        ensure_dir(dir)?;
        write_csv(&dir.join("prediction.csv"), &self.rows)?;
        write_csv(&dir.join("prediction_comparisons.csv"), &self.comparisons)?;
        write_json(&dir.join("prediction.json"), self)?;
        if !self.test_labels.is_empty() {
            for r in self.rows.iter().filter(|r| !r.scores.is_empty()) {
                let roc = roc_auc(&r.scores, &self.test_labels)?;
                let pts: Vec<(f64, f64)> = roc.curve.iter().map(|p| (p.fpr, p.tpr)).collect();
                let file = format!("roc_{}.csv", r.name.replace('+', "_"));
                write_xy_csv(&dir.join(file), ("fpr", "tpr"), &pts)?;
            }
        }
        Ok(())
    }
}

pub(crate) fn cv_options(cfg: &StudyConfig) -> CvOptions {
    CvOptions {
        n_folds: cfg.cv_folds,
        n_lambdas: cfg.n_lambdas,
        min_ratio: cfg.lambda_min_ratio,
        seed: cfg.seed,
        ..CvOptions::default()
    }
}

fn ids_of(corpus: &Corpus) -> Vec<String> {
    corpus.requests().iter().map(|r| r.id.clone()).collect()
}

fn documents(corpus: &Corpus) -> Vec<Vec<String>> {
    corpus.requests().iter().map(|r| tokenize(&r.full_text())).collect()
}

fn encoded_designs(
    dev: &Corpus,
    test: &Corpus,
    scheme: Scheme,
    lexicons: &Lexicons,
    observer: Observer<'_>,
) -> Result<(Design, Design)> {
    let dev_raw = extract_corpus(dev, lexicons)?;
    emit(observer, "encoder", ids_of(dev));
    let meta = fit_encoder(&dev_raw, dev.epoch()?)?;
    let names: Vec<String> = feature_names(scheme).iter().map(|s| s.to_string()).collect();
    let rows = |raw: &[crate::features::RawFeatures]| -> Result<Vec<Vec<f64>>> {
        raw.iter().map(|r| encode(r, &meta, scheme).map(|v| v.values)).collect()
    };
    let dev_x = Design::from_rows(names.clone(), &rows(&dev_raw)?)?;
    let test_raw = extract_corpus(test, lexicons)?;
    let test_x = Design::from_rows(names, &rows(&test_raw)?)?;
    Ok((dev_x, test_x))
}

/// L1 models over each feature set, penalties chosen by cross-validation on
/// the development corpus, evaluated once on the test corpus.
pub fn run_prediction_study(
    dev: &Corpus,
    test: &Corpus,
    cfg: &StudyConfig,
    lexicons: &Lexicons,
    observer: Observer<'_>,
) -> Result<PredictionStudyReport> {
    if dev.is_empty() || test.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let (dev_x, test_x) = encoded_designs(dev, test, Scheme::Prediction, lexicons, observer)?;
    let dev_y = dev.labels();
    let test_y = test.labels();
    let dev_ids = ids_of(dev);

    let dev_docs = documents(dev);
    let test_docs = documents(test);
    let mut grams: Vec<Option<(Design, Design)>> = vec![None, None, None];
    for n in 1..=3 {
        if !FeatureSet::ALL.iter().any(|s| s.ngram() == Some(n)) {
            continue;
        }
        let prefix = ["uni:", "bi:", "tri:"][n - 1];
        emit(observer, &format!("vocabulary:{n}"), dev_ids.clone());
        let (m, vocab) = ngram_features(&dev_docs, n, cfg.ngram_min_df)?;
        let tm = ngram_counts(&test_docs, n, &vocab)?;
        grams[n - 1] = Some((
            Design::from_doc_term(&m, vocab.terms(), prefix)?,
            Design::from_doc_term(&tm, vocab.terms(), prefix)?,
        ));
    }

    let cv = cv_options(cfg);
    let mut rows = Vec::new();
    rows.push(PredictionRow {
        name: "random".into(),
        n_features: 0,
        n_nonzero: 0,
        lambda: 0.0,
        cv_auc: 0.5,
        test_auc: 0.5,
        mwu_p: None,
        stars: String::new(),
        scores: Vec::new(),
    });
    for set in FeatureSet::ALL {
        let factors = set.factors();
        let (mut d_dev, mut d_test) = (dev_x.select_columns(&factors)?, test_x.select_columns(&factors)?);
        if let Some(n) = set.ngram() {
            let (g_dev, g_test) = grams[n - 1].as_ref().expect("n-gram design built");
            d_dev = if factors.is_empty() { g_dev.clone() } else { d_dev.hstack(g_dev)? };
            d_test = if factors.is_empty() { g_test.clone() } else { d_test.hstack(g_test)? };
        }
        let stage = format!("lambda:{}", set.name());
        let record = |rows: &[usize]| emit(observer, &stage, rows.iter().map(|&i| dev_ids[i].clone()));
        let path = select_lambda(&d_dev, &dev_y, &cv, Some(&record))?;
        emit(observer, &format!("fit:{}", set.name()), dev_ids.clone());
        let model = fit(&d_dev, &dev_y, &FitOptions::with_lambda(path.best_lambda))?;
        let scores: Vec<f64> = d_test
            .linear_predictor(&model.coefficients, model.intercept)?
            .into_iter()
            .map(sigmoid)
            .collect();
        let auc = roc_auc(&scores, &test_y)?.auc;
        let pos: Vec<f64> = scores.iter().zip(&test_y).filter(|(_, &y)| y).map(|(s, _)| *s).collect();
        let neg: Vec<f64> = scores.iter().zip(&test_y).filter(|(_, &y)| !y).map(|(s, _)| *s).collect();
        let mwu = mann_whitney_u(&pos, &neg, Tail::TwoSided)?;
        rows.push(PredictionRow {
            name: set.name().into(),
            n_features: d_dev.n_cols(),
            n_nonzero: model.n_nonzero(),
            lambda: path.best_lambda,
            cv_auc: path.mean_auc[path.best_index],
            test_auc: auc,
            mwu_p: Some(mwu.p),
            stars: stars(mwu.p).into(),
            scores,
        });
    }

    let pairs = [
        (FeatureSet::TemporalSocialText, FeatureSet::Text),
        (FeatureSet::TemporalSocialText, FeatureSet::TemporalSocial),
        (FeatureSet::TemporalSocialTextUnigram, FeatureSet::TemporalSocialText),
        (FeatureSet::TemporalSocial, FeatureSet::Temporal),
        (FeatureSet::TemporalSocial, FeatureSet::Social),
        (FeatureSet::Text, FeatureSet::Unigram),
        (FeatureSet::Text, FeatureSet::Bigram),
        (FeatureSet::Text, FeatureSet::Trigram),
    ];
    let find = |s: FeatureSet| rows.iter().find(|r| r.name == s.name()).expect("row per set");
    let mut comparisons = Vec::new();
    for (a, b) in pairs {
        let (ra, rb) = (find(a), find(b));
        let t = delong_test(&ra.scores, &rb.scores, &test_y)?;
        comparisons.push(Comparison {
            a: ra.name.clone(),
            b: rb.name.clone(),
            auc_a: ra.test_auc,
            auc_b: rb.test_auc,
            delong_z: t.statistic,
            p: t.p,
        });
    }
    Ok(PredictionStudyReport {
        n_dev: dev.len(),
        n_test: test.len(),
        rows,
        comparisons,
        test_labels: test_y,
    })
}

/// Trains a model over all factors of `scheme` on the development corpus
/// and packages it with its encoder. Without an explicit penalty one is
/// chosen by cross-validated AUC.
pub fn train_artifact(
    dev: &Corpus,
    scheme: Scheme,
    lambda: Option<f64>,
    cfg: &StudyConfig,
    lexicons: &Lexicons,
    observer: Observer<'_>,
) -> Result<ModelArtifact> {
    let raw = extract_corpus(dev, lexicons)?;
    let dev_ids = ids_of(dev);
    emit(observer, "encoder", dev_ids.clone());
    let meta = fit_encoder(&raw, dev.epoch()?)?;
    let rows: Vec<Vec<f64>> = raw
        .iter()
        .map(|r| encode(r, &meta, scheme).map(|v| v.values))
        .collect::<Result<_>>()?;
    let names = feature_names(scheme).iter().map(|s| s.to_string()).collect();
    let design = Design::from_rows(names, &rows)?;
    let y = dev.labels();
    let (lambda, cv_auc) = match lambda {
        Some(l) => (l, None),
        None => {
            let record = |rows: &[usize]| emit(observer, "lambda:artifact", rows.iter().map(|&i| dev_ids[i].clone()));
            let path = select_lambda(&design, &y, &cv_options(cfg), Some(&record))?;
            (path.best_lambda, Some(path.mean_auc[path.best_index]))
        }
    };
    emit(observer, "fit:artifact", dev_ids);
    let model = fit(&design, &y, &FitOptions::with_lambda(lambda))?;
    let mut art = ModelArtifact::from_model(&model, meta, scheme, &dev.fingerprint(), dev.len())?;
    art.diagnostics.cv_auc = cv_auc;
    Ok(art)
}
