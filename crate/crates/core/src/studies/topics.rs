use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ensure_dir, write_csv, write_json, TopicConfig};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::features::temporal_features;
use crate::textkit::{build_vocabulary, default_stopwords, tfidf, tokenize, VocabularyOptions};
use crate::topics::{NmfOptions, TopicModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicRow {
    pub topic: usize,
    pub terms: String,
    pub assigned: usize,
    pub successes: usize,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicStudyReport {
    pub n_docs: usize,
    pub vocabulary_size: usize,
    pub overall_rate: f64,
    pub converged: bool,
    pub n_iters: usize,
    pub final_objective: f64,
    pub rows: Vec<TopicRow>,
}

impl TopicStudyReport {
    /// Best minus worst defined topic success rate.
    pub fn rate_spread(&self) -> Option<f64> {
        let rates: Vec<f64> = self.rows.iter().filter_map(|r| r.rate).collect();
        let max = rates.iter().copied().reduce(f64::max)?;
        let min = rates.iter().copied().reduce(f64::min)?;
        Some(max - min)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        ensure_dir(dir)?;
        write_csv(&dir.join("topics.csv"), &self.rows)?;
        write_json(&dir.join("topics.json"), self)
    }
}

/// Sparse NMF over TF-IDF of request bodies with stopwords removed; each
/// document joins the topic with its largest weight.
pub fn run_topic_study(corpus: &Corpus, cfg: &TopicConfig, seed: u64) -> Result<(TopicStudyReport, TopicModel)> {
    let overall_rate = corpus.success_rate().ok_or(Error::EmptyCorpus)?;
    let docs: Vec<Vec<String>> = corpus.requests().iter().map(|r| tokenize(&r.body)).collect();
    let stop = default_stopwords();
    let vocab = build_vocabulary(
        &docs,
        &VocabularyOptions {
            min_df: cfg.min_df,
            stopwords: Some(&stop),
            token_filter: None,
        },
    )?;
    let x = tfidf(&docs, &vocab);
    let model = TopicModel::fit(
        &x,
        vocab,
        &NmfOptions {
            k: cfg.k,
            target_sparseness: cfg.sparseness,
            max_iters: cfg.max_iters,
            tol: cfg.tol,
            seed,
        },
    )?;
    let terms = model.top_terms(cfg.top_terms.min(model.vocab.len()))?;
    let rates = model.success_rates(&corpus.labels())?;
    let rows = terms
        .into_iter()
        .zip(rates)
        .enumerate()
        .map(|(t, (terms, r))| TopicRow {
            topic: t,
            terms: terms.join(" "),
            assigned: r.assigned,
            successes: r.successes,
            rate: r.rate,
        })
        .collect();
    let report = TopicStudyReport {
        n_docs: corpus.len(),
        vocabulary_size: model.vocab.len(),
        overall_rate,
        converged: model.factors.converged,
        n_iters: model.factors.n_iters,
        final_objective: model.factors.objective_trace.last().copied().unwrap_or(0.0),
        rows,
    };
    Ok((report, model))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalSummary {
    pub first_half_n: usize,
    pub first_half_rate: Option<f64>,
    pub second_half_n: usize,
    pub second_half_rate: Option<f64>,
}

/// Success rates of requests posted on days 1 to 15 and on later days.
pub fn temporal_summary(corpus: &Corpus) -> Result<TemporalSummary> {
    let epoch = corpus.epoch()?;
    let (mut n1, mut k1, mut n2, mut k2) = (0usize, 0usize, 0usize, 0usize);
    for r in corpus.requests() {
        if temporal_features(r.created_at, epoch)?.first_half_month {
            n1 += 1;
            k1 += usize::from(r.success);
        } else {
            n2 += 1;
            k2 += usize::from(r.success);
        }
    }
    let rate = |k: usize, n: usize| (n > 0).then(|| k as f64 / n as f64);
    Ok(TemporalSummary {
        first_half_n: n1,
        first_half_rate: rate(k1, n1),
        second_half_n: n2,
        second_half_rate: rate(k2, n2),
    })
}
