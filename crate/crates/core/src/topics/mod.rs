//! Narrative discovery with (optionally sparse) non-negative matrix
//! factorization of a TF-IDF document-term matrix.

mod nmf;

pub use nmf::{
    fit_nmf, hoyer_sparseness, nndsvd_init, objective, project_sparseness, Factorization,
    NmfOptions, INIT_EPSILON,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textkit::{DocTermMatrix, Vocabulary};

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    pub factors: Factorization,
    pub vocab: Vocabulary,
}

impl TopicModel {
    pub fn fit(x: &DocTermMatrix, vocab: Vocabulary, opts: &NmfOptions) -> Result<Self> {
        if x.n_cols() != vocab.len() {
            return Err(Error::Dimension(format!(
                "{} matrix columns for {} terms",
                x.n_cols(),
                vocab.len()
            )));
        }
        Ok(TopicModel {
            factors: fit_nmf(x, opts)?,
            vocab,
        })
    }

    pub fn k(&self) -> usize {
        self.factors.h.nrows()
    }

    pub fn n_docs(&self) -> usize {
        self.factors.w.nrows()
    }

    /// Highest-weighted `m` terms of each topic; equal weights are ordered
    /// lexicographically.
    pub fn top_terms(&self, m: usize) -> Result<Vec<Vec<String>>> {
        let terms = self.vocab.terms();
        if m > terms.len() {
            return Err(Error::InvalidArgument(format!(
                "asked for {m} terms from a vocabulary of {}",
                terms.len()
            )));
        }
        Ok((0..self.k())
            .map(|t| {
                let mut idx: Vec<usize> = (0..terms.len()).collect();
                idx.sort_by(|&a, &b| {
                    self.factors.h[(t, b)]
                        .total_cmp(&self.factors.h[(t, a)])
                        .then_with(|| terms[a].cmp(&terms[b]))
                });
                idx.into_iter().take(m).map(|j| terms[j].clone()).collect()
            })
            .collect())
    }

    /// Topic with the largest weight for each document, ties going to the
    /// lowest topic index.
    pub fn dominant_topics(&self) -> Vec<usize> {
        dominant_topics(&self.factors.w)
    }

    /// Success rate among documents whose dominant topic is each topic;
    /// `None` for topics that dominate no document.
    pub fn success_rates(&self, labels: &[bool]) -> Result<Vec<TopicRate>> {
        topic_success_rates(&self.factors.w, labels)
    }
}

pub fn dominant_topics(w: &DMatrix<f64>) -> Vec<usize> {
    (0..w.nrows())
        .map(|i| {
            let mut best = 0;
            for t in 1..w.ncols() {
                if w[(i, t)] > w[(i, best)] {
                    best = t;
                }
            }
            best
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopicRate {
    pub assigned: usize,
    pub successes: usize,
    pub rate: Option<f64>,
}

pub fn topic_success_rates(w: &DMatrix<f64>, labels: &[bool]) -> Result<Vec<TopicRate>> {
    if labels.len() != w.nrows() {
        return Err(Error::Dimension(format!(
            "{} labels for {} documents",
            labels.len(),
            w.nrows()
        )));
    }
    let mut out = vec![
        TopicRate {
            assigned: 0,
            successes: 0,
            rate: None
        };
        w.ncols()
    ];
    for (t, &y) in dominant_topics(w).into_iter().zip(labels) {
        out[t].assigned += 1;
        out[t].successes += usize::from(y);
    }
    for r in &mut out {
        if r.assigned > 0 {
            r.rate = Some(r.successes as f64 / r.assigned as f64);
        }
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct TopicModelData {
    k: usize,
    n_docs: usize,
    vocab: Vocabulary,
    /// Non-zero `(term index, weight)` pairs of each topic.
    topics: Vec<Vec<(usize, f64)>>,
    /// `(document, topic, weight)` for every non-zero document weight.
    doc_topics: Vec<(usize, usize, f64)>,
    objective_trace: Vec<f64>,
    n_iters: usize,
    converged: bool,
}

impl Serialize for TopicModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let f = &self.factors;
        let topics = (0..f.h.nrows())
            .map(|t| {
                (0..f.h.ncols())
                    .filter(|&j| f.h[(t, j)] != 0.0)
                    .map(|j| (j, f.h[(t, j)]))
                    .collect()
            })
            .collect();
        let mut doc_topics = Vec::new();
        for i in 0..f.w.nrows() {
            for t in 0..f.w.ncols() {
                if f.w[(i, t)] != 0.0 {
                    doc_topics.push((i, t, f.w[(i, t)]));
                }
            }
        }
        TopicModelData {
            k: f.h.nrows(),
            n_docs: f.w.nrows(),
            vocab: self.vocab.clone(),
            topics,
            doc_topics,
            objective_trace: f.objective_trace.clone(),
            n_iters: f.n_iters,
            converged: f.converged,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TopicModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let data = TopicModelData::deserialize(d)?;
        let m = data.vocab.len();
        let mut h = DMatrix::zeros(data.k, m);
        if data.topics.len() != data.k {
            return Err(D::Error::custom("topic count does not match k"));
        }
        for (t, row) in data.topics.iter().enumerate() {
            for &(j, v) in row {
                if j >= m {
                    return Err(D::Error::custom("term index out of range"));
                }
                h[(t, j)] = v;
            }
        }
        let mut w = DMatrix::zeros(data.n_docs, data.k);
        for &(i, t, v) in &data.doc_topics {
            if i >= data.n_docs || t >= data.k {
                return Err(D::Error::custom("document weight index out of range"));
            }
            w[(i, t)] = v;
        }
        Ok(TopicModel {
            factors: Factorization {
                w,
                h,
                objective_trace: data.objective_trace,
                n_iters: data.n_iters,
                converged: data.converged,
            },
            vocab: data.vocab,
        })
    }
}
