//! Python bindings. Reports cross the boundary as plain dicts and lists.

use askwell_core::corpus::{ingest, stratified_split, Corpus, FieldMap};
use askwell_core::features::{
    detect_gratitude, detect_image, detect_narratives, detect_reciprocity, Lexicons, Narrative, Scheme,
};
use askwell_core::glm::{fit, Design, FitOptions};
use askwell_core::scoring::{DraftRequest, DraftUser, ModelArtifact, Scorer};
use askwell_core::stats::{self, Tail};
use askwell_core::studies::{
    run_interpretation_curves, run_prediction_study, run_reciprocity_study, run_regression_study,
    temporal_summary, train_artifact, ReciprocityDefinition, StudyConfig,
};
use askwell_core::textkit;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

create_exception!(askwell, AskwellError, PyException);

fn err(e: askwell_core::Error) -> PyErr {
    match e {
        askwell_core::Error::InvalidArgument(m) => PyValueError::new_err(m),
        other => AskwellError::new_err(other.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    AskwellError::new_err(e.to_string())
}

fn value_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match (n.as_i64(), n.as_u64(), n.as_f64()) {
            (Some(i), _, _) => i.into_pyobject(py)?.into_any(),
            (_, Some(u), _) => u.into_pyobject(py)?.into_any(),
            (_, _, f) => f.unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for x in items {
                list.append(value_to_py(py, x)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, x) in map {
                dict.set_item(k, value_to_py(py, x)?)?;
            }
            dict.into_any()
        }
    })
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    value_to_py(py, &serde_json::to_value(value).map_err(json_err)?)
}

/// Parses a kebab-case option such as `"two-sided"` into its enum.
fn option<T: DeserializeOwned>(what: &str, s: &str) -> PyResult<T> {
    serde_json::from_value(Value::String(s.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown {what} {s:?}")))
}

#[pyclass(name = "ModelArtifact", module = "askwell", frozen)]
struct PyArtifact {
    inner: ModelArtifact,
}

#[pymethods]
impl PyArtifact {
    /// Built-in reference model.
    #[staticmethod]
    fn reference() -> Self {
        PyArtifact { inner: ModelArtifact::reference() }
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        ModelArtifact::load(&path).map(|inner| PyArtifact { inner }).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        ModelArtifact::from_json(text).map(|inner| PyArtifact { inner }).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    #[getter]
    fn schema_id(&self) -> String {
        self.inner.schema_id.clone()
    }

    #[getter]
    fn scheme(&self) -> &'static str {
        self.inner.scheme.name()
    }

    #[getter]
    fn intercept(&self) -> f64 {
        self.inner.intercept
    }

    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.inner.coefficients.clone()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names.clone()
    }

    #[getter]
    fn penalty(&self) -> f64 {
        self.inner.lambda
    }

    fn __repr__(&self) -> String {
        format!("ModelArtifact({:?}, {} features)", self.inner.schema_id, self.inner.coefficients.len())
    }
}

#[pyclass(name = "Scorer", module = "askwell", frozen)]
struct PyScorer {
    inner: Scorer,
}

fn draft(
    body: &str,
    title: &str,
    karma: Option<i64>,
    posted_before: Option<bool>,
    account_age_days: Option<f64>,
    timestamp: Option<i64>,
) -> DraftRequest {
    let mut d = DraftRequest::new(title, body);
    d.timestamp = timestamp;
    if karma.is_some() || posted_before.is_some() || account_age_days.is_some() {
        d.user = Some(DraftUser { karma, posted_before, account_age_days });
    }
    d
}

#[pymethods]
impl PyScorer {
    #[new]
    #[pyo3(signature = (artifact=None))]
    fn new(artifact: Option<PyRef<'_, PyArtifact>>) -> PyResult<Self> {
        let art = artifact.map_or_else(ModelArtifact::reference, |a| a.inner.clone());
        Scorer::new(art).map(|inner| PyScorer { inner }).map_err(err)
    }

    /// Probability, per-factor contributions, detector hits and what-if
    /// deltas for a draft.
    #[pyo3(signature = (body, title="", karma=None, posted_before=None, account_age_days=None, timestamp=None))]
    #[allow(clippy::too_many_arguments)]
    fn score<'py>(
        &self,
        py: Python<'py>,
        body: &str,
        title: &str,
        karma: Option<i64>,
        posted_before: Option<bool>,
        account_age_days: Option<f64>,
        timestamp: Option<i64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let d = draft(body, title, karma, posted_before, account_age_days, timestamp);
        to_py(py, &self.inner.score(&d).map_err(err)?)
    }

    #[pyo3(signature = (body, title="", karma=None, posted_before=None, account_age_days=None, timestamp=None))]
    #[allow(clippy::too_many_arguments)]
    fn probability(
        &self,
        body: &str,
        title: &str,
        karma: Option<i64>,
        posted_before: Option<bool>,
        account_age_days: Option<f64>,
        timestamp: Option<i64>,
    ) -> PyResult<f64> {
        let d = draft(body, title, karma, posted_before, account_age_days, timestamp);
        Ok(self.inner.score(&d).map_err(err)?.probability)
    }

    fn model_info<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.model_info())
    }
}

#[pyclass(name = "Corpus", module = "askwell", frozen)]
struct PyCorpus {
    inner: Corpus,
}

#[pymethods]
impl PyCorpus {
    /// Loads requests and optional histories. `format` is `"canonical"` or
    /// `"raop"`; a TOML `fieldmap` path overrides it.
    #[staticmethod]
    #[pyo3(signature = (requests, histories=None, format="canonical", fieldmap=None))]
    fn ingest(
        requests: std::path::PathBuf,
        histories: Option<std::path::PathBuf>,
        format: &str,
        fieldmap: Option<std::path::PathBuf>,
    ) -> PyResult<Self> {
        let map = match (fieldmap, format) {
            (Some(p), _) => FieldMap::load(&p).map_err(err)?,
            (None, "raop") => FieldMap::raop_public(),
            (None, "canonical") => FieldMap::default(),
            (None, other) => return Err(PyValueError::new_err(format!("unknown format {other:?}"))),
        };
        let report = ingest(&requests, histories.as_deref(), &map).map_err(err)?;
        Ok(PyCorpus { inner: report.corpus })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn success_rate(&self) -> Option<f64> {
        self.inner.success_rate()
    }

    #[getter]
    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    fn ids(&self) -> Vec<String> {
        self.inner.requests().iter().map(|r| r.id.clone()).collect()
    }

    fn labels(&self) -> Vec<bool> {
        self.inner.labels()
    }

    #[pyo3(signature = (dev_fraction=0.7, seed=0))]
    fn split(&self, dev_fraction: f64, seed: u64) -> PyResult<(PyCorpus, PyCorpus)> {
        let (dev, test) = stratified_split(&self.inner, dev_fraction, seed).map_err(err)?;
        Ok((PyCorpus { inner: dev }, PyCorpus { inner: test }))
    }

    fn __repr__(&self) -> String {
        format!("Corpus({} requests)", self.inner.len())
    }
}

#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    textkit::tokenize(text)
}

/// Detector output for a piece of text.
#[pyfunction]
fn detect<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    let hits = detect_narratives(text, &Lexicons::default().narratives);
    let narratives: serde_json::Map<String, Value> = Narrative::ALL
        .iter()
        .map(|n| (n.name().to_string(), Value::from(hits.counts[n.index()])))
        .collect();
    to_py(
        py,
        &serde_json::json!({
            "narratives": narratives,
            "gratitude": detect_gratitude(text),
            "reciprocity": detect_reciprocity(text),
            "image": detect_image(text),
        }),
    )
}

#[pyfunction]
fn roc_auc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    stats::roc_auc(&scores, &labels).map(|r| r.auc).map_err(err)
}

#[pyfunction]
fn delong_test<'py>(py: Python<'py>, a: Vec<f64>, b: Vec<f64>, labels: Vec<bool>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &stats::delong_test(&a, &b, &labels).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (x, y, tail="two-sided"))]
fn mann_whitney_u<'py>(py: Python<'py>, x: Vec<f64>, y: Vec<f64>, tail: &str) -> PyResult<Bound<'py, PyAny>> {
    let tail: Tail = option("tail", tail)?;
    to_py(py, &stats::mann_whitney_u(&x, &y, tail).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (k, n, p0, tail="two-sided"))]
fn binomial_test<'py>(py: Python<'py>, k: u64, n: u64, p0: f64, tail: &str) -> PyResult<Bound<'py, PyAny>> {
    let tail: Tail = option("tail", tail)?;
    to_py(py, &stats::binomial_test(k, n, p0, tail).map_err(err)?)
}

/// L1-penalized logistic regression on dense rows.
#[pyfunction]
#[pyo3(signature = (rows, labels, penalty=0.0, names=None))]
fn fit_logistic<'py>(
    py: Python<'py>,
    rows: Vec<Vec<f64>>,
    labels: Vec<bool>,
    penalty: f64,
    names: Option<Vec<String>>,
) -> PyResult<Bound<'py, PyAny>> {
    let p = rows.first().map_or(0, Vec::len);
    let names = names.unwrap_or_else(|| (0..p).map(|j| format!("x{j}")).collect());
    let design = Design::from_rows(names, &rows).map_err(err)?;
    let model = fit(&design, &labels, &FitOptions::with_lambda(penalty)).map_err(err)?;
    to_py(py, &model)
}

#[pyfunction]
fn regression_study<'py>(py: Python<'py>, corpus: PyRef<'_, PyCorpus>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &run_regression_study(&corpus.inner, &Lexicons::default()).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (dev, test, cv_folds=5, n_lambdas=20, seed=0))]
fn prediction_study<'py>(
    py: Python<'py>,
    dev: PyRef<'_, PyCorpus>,
    test: PyRef<'_, PyCorpus>,
    cv_folds: usize,
    n_lambdas: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = StudyConfig { cv_folds, n_lambdas, seed, ..StudyConfig::default() };
    let report = run_prediction_study(&dev.inner, &test.inner, &cfg, &Lexicons::default(), None).map_err(err)?;
    to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (corpus, definition="either", high_status_fraction=0.2))]
fn reciprocity_study<'py>(
    py: Python<'py>,
    corpus: PyRef<'_, PyCorpus>,
    definition: &str,
    high_status_fraction: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let def: ReciprocityDefinition = option("definition", definition)?;
    to_py(py, &run_reciprocity_study(&corpus.inner, def, high_status_fraction, &[]).map_err(err)?)
}

#[pyfunction(name = "temporal_summary")]
fn temporal<'py>(py: Python<'py>, corpus: PyRef<'_, PyCorpus>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &temporal_summary(&corpus.inner).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (corpus, scheme="regression", penalty=None, cv_folds=5, n_lambdas=20, seed=0))]
fn train(
    corpus: PyRef<'_, PyCorpus>,
    scheme: &str,
    penalty: Option<f64>,
    cv_folds: usize,
    n_lambdas: usize,
    seed: u64,
) -> PyResult<PyArtifact> {
    let scheme: Scheme = option("scheme", scheme)?;
    let cfg = StudyConfig { cv_folds, n_lambdas, seed, ..StudyConfig::default() };
    let inner = train_artifact(&corpus.inner, scheme, penalty, &cfg, &Lexicons::default(), None).map_err(err)?;
    Ok(PyArtifact { inner })
}

#[pyfunction]
fn interpretation_curves<'py>(py: Python<'py>, artifact: PyRef<'_, PyArtifact>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &run_interpretation_curves(&artifact.inner).map_err(err)?)
}

#[pymodule]
fn askwell(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("AskwellError", m.py().get_type::<AskwellError>())?;
    m.add_class::<PyArtifact>()?;
    m.add_class::<PyScorer>()?;
    m.add_class::<PyCorpus>()?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(delong_test, m)?)?;
    m.add_function(wrap_pyfunction!(mann_whitney_u, m)?)?;
    m.add_function(wrap_pyfunction!(binomial_test, m)?)?;
    m.add_function(wrap_pyfunction!(fit_logistic, m)?)?;
    m.add_function(wrap_pyfunction!(regression_study, m)?)?;
    m.add_function(wrap_pyfunction!(prediction_study, m)?)?;
    m.add_function(wrap_pyfunction!(reciprocity_study, m)?)?;
    m.add_function(wrap_pyfunction!(temporal, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(interpretation_curves, m)?)?;
    Ok(())
}
