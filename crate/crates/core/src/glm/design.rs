use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::textkit::DocTermMatrix;

#[derive(Debug, Clone, PartialEq, Default)]
struct Column {
    rows: Vec<u32>,
    values: Vec<f64>,
}

/// Named feature matrix stored column-wise, keeping only non-zero entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    n_rows: usize,
    names: Vec<String>,
    columns: Vec<Column>,
}

impl Design {
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let mut columns = vec![Column::default(); names.len()];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != names.len() {
                return Err(Error::Dimension(format!(
                    "row {i} has {} values for {} names",
                    row.len(),
                    names.len()
                )));
            }
            for (col, &v) in columns.iter_mut().zip(row) {
                if v != 0.0 {
                    col.rows.push(i as u32);
                    col.values.push(v);
                }
            }
        }
        Self::checked(rows.len(), names, columns)
    }

    /// One column per matrix column, named `prefix` + vocabulary term.
    pub fn from_doc_term(m: &DocTermMatrix, terms: &[String], prefix: &str) -> Result<Self> {
        if terms.len() != m.n_cols() {
            return Err(Error::Dimension(format!(
                "{} terms for {} matrix columns",
                terms.len(),
                m.n_cols()
            )));
        }
        let columns = m
            .columns()
            .into_iter()
            .map(|entries| Column {
                rows: entries.iter().map(|&(i, _)| i as u32).collect(),
                values: entries.iter().map(|&(_, v)| v).collect(),
            })
            .collect();
        let names = terms.iter().map(|t| format!("{prefix}{t}")).collect();
        Self::checked(m.n_rows(), names, columns)
    }

    fn checked(n_rows: usize, names: Vec<String>, columns: Vec<Column>) -> Result<Self> {
        let mut seen = HashMap::with_capacity(names.len());
        for n in &names {
            if seen.insert(n.as_str(), ()).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate column name `{n}`")));
            }
        }
        Ok(Design {
            n_rows,
            names,
            columns,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Row indices and values of the non-zero entries of column `j`.
    pub fn column(&self, j: usize) -> (&[u32], &[f64]) {
        let c = &self.columns[j];
        (&c.rows, &c.values)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Columns of `self` followed by columns of `other`.
    pub fn hstack(&self, other: &Design) -> Result<Design> {
        if self.n_rows != other.n_rows {
            return Err(Error::Dimension(format!(
                "cannot stack {} rows with {} rows",
                self.n_rows, other.n_rows
            )));
        }
        let mut names = self.names.clone();
        names.extend(other.names.iter().cloned());
        let mut columns = self.columns.clone();
        columns.extend(other.columns.iter().cloned());
        Self::checked(self.n_rows, names, columns)
    }

    pub fn select_columns(&self, names: &[&str]) -> Result<Design> {
        let mut out_names = Vec::with_capacity(names.len());
        let mut columns = Vec::with_capacity(names.len());
        for &n in names {
            let j = self
                .position(n)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown column `{n}`")))?;
            out_names.push(n.to_string());
            columns.push(self.columns[j].clone());
        }
        Self::checked(self.n_rows, out_names, columns)
    }

    /// The given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Design {
        let mut new_index = vec![u32::MAX; self.n_rows];
        for (k, &i) in rows.iter().enumerate() {
            new_index[i] = k as u32;
        }
        let columns = self
            .columns
            .iter()
            .map(|c| {
                let mut pairs: Vec<(u32, f64)> = c
                    .rows
                    .iter()
                    .zip(&c.values)
                    .filter(|(&i, _)| new_index[i as usize] != u32::MAX)
                    .map(|(&i, &v)| (new_index[i as usize], v))
                    .collect();
                pairs.sort_by_key(|p| p.0);
                Column {
                    rows: pairs.iter().map(|p| p.0).collect(),
                    values: pairs.iter().map(|p| p.1).collect(),
                }
            })
            .collect();
        Design {
            n_rows: rows.len(),
            names: self.names.clone(),
            columns,
        }
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns
            .iter()
            .map(|c| match c.rows.binary_search(&(i as u32)) {
                Ok(k) => c.values[k],
                Err(_) => 0.0,
            })
            .collect()
    }

    pub fn linear_predictor(&self, beta: &[f64], intercept: f64) -> Result<Vec<f64>> {
        if beta.len() != self.n_cols() {
            return Err(Error::Dimension(format!(
                "{} coefficients for {} columns",
                beta.len(),
                self.n_cols()
            )));
        }
        let mut eta = vec![intercept; self.n_rows];
        for (c, &b) in self.columns.iter().zip(beta) {
            if b != 0.0 {
                for (&i, &v) in c.rows.iter().zip(&c.values) {
                    eta[i as usize] += b * v;
                }
            }
        }
        Ok(eta)
    }
}
