//! Tokenization, vocabularies, TF-IDF and n-gram count matrices.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pattern for links removed before tokenization.
pub const URL_PATTERN: &str = r"(?i)\b(?:https?://|www\.)\S+";

static DEFAULT_STOPWORDS_TXT: &str = include_str!("../data/stopwords.txt");

fn url_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(URL_PATTERN).expect("valid url pattern"))
}

/// Lowercased runs of alphabetic characters and apostrophes. Links are
/// dropped, typographic apostrophes are folded to `'`, and apostrophes at
/// either end of a run are trimmed.
pub fn tokenize(text: &str) -> Vec<String> {
    let stripped = url_regex().replace_all(text, " ");
    let mut tokens = Vec::new();
    let mut current = String::new();
    let flush = |current: &mut String, tokens: &mut Vec<String>| {
        let t = current.trim_matches('\'');
        if !t.is_empty() {
            tokens.push(t.to_string());
        }
        current.clear();
    };
    for ch in stripped.chars() {
        if ch.is_alphabetic() {
            current.extend(ch.to_lowercase().filter(|c| c.is_alphabetic()));
        } else if ch == '\'' || ch == '\u{2019}' {
            current.push('\'');
        } else if !current.is_empty() {
            flush(&mut current, &mut tokens);
        }
    }
    flush(&mut current, &mut tokens);
    tokens
}

pub fn word_count(text: &str) -> usize {
    tokenize(text).len()
}

/// Reads a word list: one entry per line, lowercased, blank lines and `#`
/// comments skipped.
pub fn load_wordlist(path: &Path) -> Result<HashSet<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_wordlist(&text))
}

pub fn parse_wordlist(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

pub fn default_stopwords() -> HashSet<String> {
    parse_wordlist(DEFAULT_STOPWORDS_TXT)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyData", into = "VocabularyData")]
pub struct Vocabulary {
    terms: Vec<String>,
    df: Vec<usize>,
    n_docs: usize,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyData {
    terms: Vec<String>,
    df: Vec<usize>,
    n_docs: usize,
}

impl From<VocabularyData> for Vocabulary {
    fn from(d: VocabularyData) -> Self {
        Vocabulary::from_parts(d.terms, d.df, d.n_docs)
    }
}

impl From<Vocabulary> for VocabularyData {
    fn from(v: Vocabulary) -> Self {
        VocabularyData {
            terms: v.terms,
            df: v.df,
            n_docs: v.n_docs,
        }
    }
}

impl Vocabulary {
    fn from_parts(terms: Vec<String>, df: Vec<usize>, n_docs: usize) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary {
            terms,
            df,
            n_docs,
            index,
        }
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn df(&self) -> &[usize] {
        &self.df
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    /// `ln(n_docs / df) + 1`.
    pub fn idf(&self, column: usize) -> f64 {
        (self.n_docs as f64 / self.df[column] as f64).ln() + 1.0
    }
}

pub struct VocabularyOptions<'a> {
    pub min_df: usize,
    pub stopwords: Option<&'a HashSet<String>>,
    pub token_filter: Option<&'a dyn Fn(&str) -> bool>,
}

impl Default for VocabularyOptions<'_> {
    fn default() -> Self {
        VocabularyOptions {
            min_df: 1,
            stopwords: None,
            token_filter: None,
        }
    }
}

/// Terms with document frequency at least `min_df` that survive the
/// stopword list and token filter, sorted lexicographically.
pub fn build_vocabulary(docs: &[Vec<String>], opts: &VocabularyOptions<'_>) -> Result<Vocabulary> {
    if opts.min_df == 0 {
        return Err(Error::InvalidArgument("min_df must be at least 1".into()));
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in docs {
        let unique: HashSet<&str> = doc.iter().map(String::as_str).collect();
        for t in unique {
            *df.entry(t).or_default() += 1;
        }
    }
    let (terms, dfs): (Vec<String>, Vec<usize>) = df
        .into_iter()
        .filter(|&(t, d)| {
            d >= opts.min_df
                && !opts.stopwords.is_some_and(|s| s.contains(t))
                && opts.token_filter.is_none_or(|f| f(t))
        })
        .map(|(t, d)| (t.to_string(), d))
        .unzip();
    if terms.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    Ok(Vocabulary::from_parts(terms, dfs, docs.len()))
}

/// Sparse non-negative document-term matrix stored by rows; each row holds
/// `(column, value)` pairs sorted by column with no explicit zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct DocTermMatrix {
    n_cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl DocTermMatrix {
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        for row in &rows {
            for &(c, v) in row {
                if c >= n_cols {
                    return Err(Error::Dimension(format!("column {c} >= {n_cols}")));
                }
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "document-term entries must be finite and non-negative, got {v}"
                    )));
                }
            }
        }
        let rows = rows
            .into_iter()
            .map(|mut r| {
                r.retain(|&(_, v)| v != 0.0);
                r.sort_by_key(|&(c, _)| c);
                r
            })
            .collect();
        Ok(DocTermMatrix { n_cols, rows })
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        let rows = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| (j, m[(i, j)])).collect())
            .collect();
        Self::from_rows(m.ncols(), rows)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[(usize, f64)]> {
        self.rows.iter().map(Vec::as_slice)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map(|k| self.rows[i][k].1)
            .unwrap_or(0.0)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.rows.iter().flatten().map(|&(_, v)| v * v).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows(), self.n_cols);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Column-major copy: for each column, `(row, value)` pairs.
    pub fn columns(&self) -> Vec<Vec<(usize, f64)>> {
        let mut cols = vec![Vec::new(); self.n_cols];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                cols[j].push((i, v));
            }
        }
        cols
    }
}

fn count_row<'a>(terms: impl Iterator<Item = &'a str>, vocab: &Vocabulary) -> BTreeMap<usize, f64> {
    let mut counts = BTreeMap::new();
    for t in terms {
        if let Some(j) = vocab.index_of(t) {
            *counts.entry(j).or_insert(0.0) += 1.0;
        }
    }
    counts
}

/// Raw term counts weighted by `ln(n_docs / df) + 1`.
pub fn tfidf(docs: &[Vec<String>], vocab: &Vocabulary) -> DocTermMatrix {
    let rows = docs
        .iter()
        .map(|doc| {
            count_row(doc.iter().map(String::as_str), vocab)
                .into_iter()
                .map(|(j, c)| (j, c * vocab.idf(j)))
                .collect()
        })
        .collect();
    DocTermMatrix {
        n_cols: vocab.len(),
        rows,
    }
}

fn ngrams(doc: &[String], n: usize) -> Vec<String> {
    if doc.len() < n {
        return Vec::new();
    }
    doc.windows(n).map(|w| w.join("_")).collect()
}

fn check_order(n: usize) -> Result<()> {
    if !(1..=3).contains(&n) {
        return Err(Error::InvalidArgument(format!("n-gram order must be 1, 2 or 3, got {n}")));
    }
    Ok(())
}

/// Contiguous n-gram counts (grams joined by `_`) over a vocabulary
/// thresholded at `min_df`.
pub fn ngram_features(
    docs: &[Vec<String>],
    n: usize,
    min_df: usize,
) -> Result<(DocTermMatrix, Vocabulary)> {
    check_order(n)?;
    let grams: Vec<Vec<String>> = docs.iter().map(|d| ngrams(d, n)).collect();
    let vocab = build_vocabulary(
        &grams,
        &VocabularyOptions {
            min_df,
            ..Default::default()
        },
    )?;
    let m = counts_for(&grams, &vocab);
    Ok((m, vocab))
}

/// Counts n-grams of new documents against an existing vocabulary.
pub fn ngram_counts(docs: &[Vec<String>], n: usize, vocab: &Vocabulary) -> Result<DocTermMatrix> {
    check_order(n)?;
    let grams: Vec<Vec<String>> = docs.iter().map(|d| ngrams(d, n)).collect();
    Ok(counts_for(&grams, vocab))
}

fn counts_for(grams: &[Vec<String>], vocab: &Vocabulary) -> DocTermMatrix {
    let rows = grams
        .iter()
        .map(|g| count_row(g.iter().map(String::as_str), vocab).into_iter().collect())
        .collect();
    DocTermMatrix {
        n_cols: vocab.len(),
        rows,
    }
}
